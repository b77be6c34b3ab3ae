#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "specshape/experiment.hpp"

namespace specshape {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr std::size_t kMaxPoints = 1000;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

double nice_step(double range, int target) {
  const double raw = range / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

const char* axis_label(Metric m) {
  switch (m) {
    case Metric::steps: return "steps until solved";
    case Metric::soft: return "soft violations";
    case Metric::hard: return "hard violations";
  }
  return "";
}

}  // namespace

std::string plot_svg(std::span<const AggregateCurve> curves, Metric metric) {
  std::vector<const AggregateCurve*> selected;
  for (const auto& c : curves)
    if (c.metric == metric && c.episodes() > 0) selected.push_back(&c);
  if (selected.empty())
    throw std::invalid_argument(std::string("no curves for metric '") + metric_name(metric) + "'");

  std::size_t episodes = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* c : selected) {
    episodes = std::max(episodes, c->episodes());
    for (std::size_t e = 0; e < c->episodes(); ++e) {
      lo = std::min({lo, c->ci_low[e], c->mean[e]});
      hi = std::max({hi, c->ci_high[e], c->mean[e]});
    }
  }
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  const double ystep = nice_step(hi - lo, 6);
  lo = std::floor(lo / ystep) * ystep;
  hi = std::ceil(hi / ystep) * ystep;
  const double xmax = std::max<double>(static_cast<double>(episodes), 2.0);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double episode) { return kLeft + (episode - 1.0) / (xmax - 1.0) * pw; };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
       "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (double v = lo; v <= hi + ystep * 1e-6; v += ystep) {
    const std::string y = fmt(py(v));
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + y + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" + y +
         "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(py(v) + 4) + "\" text-anchor=\"end\">" + tick_label(v) +
         "</text>\n";
  }
  const double xstep = std::max(1.0, nice_step(xmax - 1.0, 8));
  for (double e = xstep; e <= xmax + 1e-9; e += xstep) {
    s += "<text x=\"" + fmt(px(e)) + "\" y=\"" + fmt(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         tick_label(e) + "</text>\n";
  }
  s += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 15) + "\" text-anchor=\"middle\">episode</text>\n";
  s += "<text transform=\"translate(18," + fmt(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       axis_label(metric) + "</text>\n";

  for (std::size_t k = 0; k < selected.size(); ++k) {
    const auto& c = *selected[k];
    const char* color = kPalette[k % kPalette.size()];
    const std::size_t n = c.episodes();
    const std::size_t stride = std::max<std::size_t>(1, (n + kMaxPoints - 1) / kMaxPoints);
    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < n; e += stride) idx.push_back(e);
    if (idx.back() != n - 1) idx.push_back(n - 1);

    std::string band;
    for (std::size_t e : idx) band += fmt(px(static_cast<double>(e + 1))) + "," + fmt(py(c.ci_high[e])) + " ";
    for (auto it = idx.rbegin(); it != idx.rend(); ++it)
      band += fmt(px(static_cast<double>(*it + 1))) + "," + fmt(py(c.ci_low[*it])) + " ";
    band.pop_back();
    s += "<polygon class=\"ci\" points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";

    std::string line;
    for (std::size_t e : idx) line += fmt(px(static_cast<double>(e + 1))) + "," + fmt(py(c.mean[e])) + " ";
    line.pop_back();
    s += "<polyline class=\"mean\" points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"1.5\"/>\n";

    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    const double lx = kLeft + pw + 15;
    s += "<g class=\"legend\"><line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(lx + 20) + "\" y2=\"" +
         fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"3\"/><text x=\"" + fmt(lx + 26) + "\" y=\"" +
         fmt(ly + 4) + "\">" + escape(c.algorithm + " " + c.scheme) + "</text></g>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_plot(std::span<const AggregateCurve> curves, Metric metric, const std::filesystem::path& path) {
  const std::string svg = plot_svg(curves, metric);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace specshape
