#include <sstream>

#include "specshape/env.hpp"

namespace specshape {

namespace {

std::string bucket_string(const TaskBuckets& tasks) {
  std::ostringstream out;
  out << '[';
  bool first_bucket = true;
  for (const auto& b : tasks.buckets()) {
    if (!first_bucket) out << ", ";
    first_bucket = false;
    out << '{';
    for (std::size_t k = 0; k < b.size(); ++k) out << (k ? "," : "") << b[k];
    out << '}';
  }
  out << ']';
  return out.str();
}

}  // namespace

std::string FactoryEnv::render_text() const {
  const auto& L = *layout_;
  std::ostringstream out;
  out << "step " << state_.step << '/' << config_.step_limit;
  if (state_.emergency_active) out << "  !! EMERGENCY !!";
  out << '\n';

  // Each cell is drawn as "<kind><count>": E entry, X exit, digit machine type,
  // followed by the number of agents in the cell ('.' if none). '*' marks
  // cells with capacity above one. Path edges are drawn between cells.
  for (int y = 0; y < L.height(); ++y) {
    std::string row;
    std::string below;
    for (int x = 0; x < L.width(); ++x) {
      const int c = L.index_of(x, y);
      const auto& cell = L.cell(c);
      std::string tag;
      if (c == L.entry() && c == L.exit()) tag = "EX";
      else if (c == L.entry()) tag = "E";
      else if (c == L.exit()) tag = "X";
      else tag = std::to_string(*cell.machine_type);
      if (L.capacity(c, config_.n_agents) > 1) tag += '*';
      const int occ = state_.occupancy(c);
      tag += occ > 0 ? std::to_string(occ) : ".";
      while (tag.size() < 4) tag += ' ';
      row += '[' + tag + ']';
      if (x + 1 < L.width()) row += L.has_edge(c, L.index_of(x + 1, y)) ? "-" : " ";
      std::string v = (y + 1 < L.height() && L.has_edge(c, L.index_of(x, y + 1))) ? "  |   " : "      ";
      below += v + " ";
    }
    out << row << '\n';
    if (y + 1 < L.height()) out << below << '\n';
  }

  for (const auto& a : state_.agents) {
    out << "agent " << a.id << " @" << a.cell << " (" << L.x_of(a.cell) << ',' << L.y_of(a.cell)
        << ") tasks " << bucket_string(a.tasks);
    if (a.enqueued) out << " enqueued";
    if (a.done) out << " done";
    out << '\n';
  }
  for (std::size_t c = 0; c < state_.queues.size(); ++c) {
    if (state_.queues[c].empty()) continue;
    out << "queue @" << c << ':';
    for (int id : state_.queues[c]) out << ' ' << id;
    out << '\n';
  }
  return out.str();
}

std::string FactoryEnv::render_svg() const {
  const auto& L = *layout_;
  constexpr int kCell = 60;
  constexpr int kPad = 20;
  const int banner = 30;
  const int w = L.width() * kCell + 2 * kPad;
  const int h = L.height() * kCell + 2 * kPad + banner;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"monospace\" font-size=\"11\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kPad << "\" y=\"20\">step " << state_.step << "/" << config_.step_limit
      << "</text>\n";
  if (state_.emergency_active)
    out << "<text class=\"emergency\" x=\"" << w - kPad << "\" y=\"20\" text-anchor=\"end\" "
        << "fill=\"red\" font-weight=\"bold\">EMERGENCY</text>\n";

  auto cx = [&](int c) { return kPad + L.x_of(c) * kCell + kCell / 2; };
  auto cy = [&](int c) { return banner + kPad + L.y_of(c) * kCell + kCell / 2; };

  for (const auto& cell : L.cells())
    for (int v : cell.neighbors)
      if (v > cell.index)
        out << "<line x1=\"" << cx(cell.index) << "\" y1=\"" << cy(cell.index) << "\" x2=\"" << cx(v)
            << "\" y2=\"" << cy(v) << "\" stroke=\"#999\" stroke-width=\"4\"/>\n";

  for (const auto& cell : L.cells()) {
    const int c = cell.index;
    const bool terminal = c == L.entry() || c == L.exit();
    const char* fill = terminal ? "#9ecae1" : (L.capacity(c, config_.n_agents) > 1 ? "#f0f0f0" : "#d9d9d9");
    out << "<rect x=\"" << cx(c) - 18 << "\" y=\"" << cy(c) - 18
        << "\" width=\"36\" height=\"36\" fill=\"" << fill << "\" stroke=\"#333\"/>\n";
    std::string label = c == L.entry() ? "E" : c == L.exit() ? "X" : std::to_string(*cell.machine_type);
    out << "<text x=\"" << cx(c) - 15 << "\" y=\"" << cy(c) - 6 << "\">" << label << "</text>\n";
  }

  for (const auto& a : state_.agents) {
    const int slot = a.id % 4;
    const int ox = (slot % 2) * 12 - 6;
    const int oy = (slot / 2) * 12 - 2;
    const char* color = a.done ? "#31a354" : a.enqueued ? "#fd8d3c" : "#3182bd";
    out << "<circle class=\"agent\" cx=\"" << cx(a.cell) + ox << "\" cy=\"" << cy(a.cell) + oy
        << "\" r=\"5\" fill=\"" << color << "\"><title>agent " << a.id << ' '
        << bucket_string(a.tasks) << "</title></circle>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace specshape
