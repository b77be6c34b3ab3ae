#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "specshape/experiment.hpp"

namespace specshape {

namespace {

constexpr double kZ95 = 1.96;
constexpr std::string_view kCurveHeader = "episode,metric,scheme,algorithm,mean,ci_low,ci_high";

void append_number(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  out.append(buf, end);
}

double parse_number(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw std::runtime_error("line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::steps: return "steps";
    case Metric::soft: return "soft";
    case Metric::hard: return "hard";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  if (name == "steps") return Metric::steps;
  if (name == "soft") return Metric::soft;
  if (name == "hard") return Metric::hard;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

double metric_value(const EpisodeRecord& r, Metric m) {
  switch (m) {
    case Metric::steps: return static_cast<double>(r.steps_until_solved);
    case Metric::soft: return static_cast<double>(r.soft_violations);
    case Metric::hard: return static_cast<double>(r.hard_violations);
  }
  return 0.0;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw std::invalid_argument("moving average window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - static_cast<std::size_t>(window)];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

AggregateCurve aggregate_series(std::span<const std::vector<double>> per_seed) {
  if (per_seed.size() < 2)
    throw std::invalid_argument("confidence intervals need at least two seeds");
  const std::size_t len = per_seed.front().size();
  for (const auto& s : per_seed)
    if (s.size() != len) throw std::invalid_argument("seeds have different episode counts");

  AggregateCurve c;
  c.mean.resize(len);
  c.ci_low.resize(len);
  c.ci_high.resize(len);
  const auto n = static_cast<double>(per_seed.size());
  for (std::size_t e = 0; e < len; ++e) {
    double sum = 0.0;
    for (const auto& s : per_seed) sum += s[e];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : per_seed) ss += (s[e] - mean) * (s[e] - mean);
    const double half = kZ95 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    c.mean[e] = mean;
    c.ci_low[e] = mean - half;
    c.ci_high[e] = mean + half;
  }
  return c;
}

std::vector<AggregateCurve> aggregate(std::span<const RunResult> runs, int smoothing_window) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{algorithm_name(r.key.algorithm), r.key.scheme}].push_back(&r);

  std::vector<AggregateCurve> out;
  for (Metric m : {Metric::steps, Metric::soft, Metric::hard}) {
    for (const auto& [key, members] : groups) {
      std::vector<std::vector<double>> series;
      for (const RunResult* r : members) {
        std::vector<double> v;
        v.reserve(r->records.size());
        for (const auto& rec : r->records) v.push_back(metric_value(rec, m));
        series.push_back(moving_average(v, smoothing_window));
      }
      AggregateCurve c = aggregate_series(series);
      c.metric = m;
      c.algorithm = key.first;
      c.scheme = key.second;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::string curves_to_csv(std::span<const AggregateCurve> curves) {
  std::string out(kCurveHeader);
  out += '\n';
  for (const auto& c : curves) {
    for (std::size_t e = 0; e < c.episodes(); ++e) {
      out += std::to_string(e + 1);
      out += ',';
      out += metric_name(c.metric);
      out += ',';
      out += c.scheme;
      out += ',';
      out += c.algorithm;
      out += ',';
      append_number(out, c.mean[e]);
      out += ',';
      append_number(out, c.ci_low[e]);
      out += ',';
      append_number(out, c.ci_high[e]);
      out += '\n';
    }
  }
  return out;
}

void emit_csv(std::span<const AggregateCurve> curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << curves_to_csv(curves);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<AggregateCurve> parse_csv(std::string_view text) {
  std::vector<AggregateCurve> out;
  std::map<std::tuple<Metric, std::string, std::string>, std::size_t> index;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kCurveHeader) throw std::runtime_error("unexpected curves header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 7 fields");
    const Metric m = parse_metric(f[1]);
    const auto key = std::make_tuple(m, std::string(f[2]), std::string(f[3]));
    auto it = index.find(key);
    if (it == index.end()) {
      AggregateCurve c;
      c.metric = m;
      c.scheme = std::get<1>(key);
      c.algorithm = std::get<2>(key);
      out.push_back(std::move(c));
      it = index.emplace(key, out.size() - 1).first;
    }
    auto& c = out[it->second];
    const double episode = parse_number(f[0], line_no);
    if (episode != static_cast<double>(c.episodes() + 1))
      throw std::runtime_error("line " + std::to_string(line_no) + ": episodes out of order");
    c.mean.push_back(parse_number(f[4], line_no));
    c.ci_low.push_back(parse_number(f[5], line_no));
    c.ci_high.push_back(parse_number(f[6], line_no));
  }
  if (line_no == 0) throw std::runtime_error("empty curves file");
  return out;
}

std::vector<AggregateCurve> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

std::string records_to_csv(std::span<const EpisodeRecord> records) {
  std::string out =
      "episode,steps_until_solved,solved,soft_violations,hard_violations,wrong_machine_uses,"
      "items_completed,tasks_finished,step_count,machines_used,path_violations,collisions,"
      "emergency_violations,epsilon_start,reset_applied,mean_loss,updates\n";
  for (const auto& r : records) {
    const auto& t = r.totals;
    for (std::int64_t v : {static_cast<std::int64_t>(r.episode), static_cast<std::int64_t>(r.steps_until_solved),
                           static_cast<std::int64_t>(r.solved), r.soft_violations, r.hard_violations,
                           r.wrong_machine_uses, t.items_completed, t.tasks_finished, t.step_count, t.machines_used,
                           t.path_violations, t.agent_collisions, t.emergency_violations}) {
      out += std::to_string(v);
      out += ',';
    }
    append_number(out, r.epsilon_start);
    out += ',';
    out += r.reset_applied ? '1' : '0';
    out += ',';
    append_number(out, r.mean_loss);
    out += ',';
    out += std::to_string(r.updates);
    out += '\n';
  }
  return out;
}

}  // namespace specshape
