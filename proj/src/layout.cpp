#include "specshape/layout.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace specshape {

using nlohmann::json;

int Capacity::resolve(int n_agents) const {
  switch (kind) {
    case Kind::one:
      return 1;
    case Kind::half:
      return std::max(1, n_agents / 2);
    case Kind::all:
      return std::max(1, n_agents);
    case Kind::fixed:
      return fixed;
  }
  return 1;
}

FactoryLayout::FactoryLayout(int width, int height, int entry, int exit, int num_machine_types,
                             std::vector<std::optional<int>> machine_types,
                             std::vector<Capacity> capacities,
                             std::span<const std::pair<int, int>> directed_edges)
    : width_(width), height_(height), entry_(entry), exit_(exit), num_machine_types_(num_machine_types) {
  if (width < 1 || height < 1) throw LayoutError("layout dimensions must be positive");
  const int n = width * height;
  if (entry < 0 || entry >= n) throw LayoutError("entry index out of range");
  if (exit < 0 || exit >= n) throw LayoutError("exit index out of range");
  if (num_machine_types < 1) throw LayoutError("num_machine_types must be positive");
  if (static_cast<int>(machine_types.size()) != n)
    throw LayoutError("machine_types must have width*height entries");
  if (static_cast<int>(capacities.size()) != n)
    throw LayoutError("capacity_classes must have width*height entries");

  cells_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Cell& c = cells_[static_cast<std::size_t>(i)];
    c.index = i;
    c.capacity = capacities[static_cast<std::size_t>(i)];
    if (c.capacity.kind == Capacity::Kind::fixed && c.capacity.fixed < 1)
      throw LayoutError("cell " + std::to_string(i) + " has capacity < 1");
    const auto& type = machine_types[static_cast<std::size_t>(i)];
    if (i == entry || i == exit) {
      if (type) throw LayoutError("entry/exit cells carry no machine");
    } else {
      if (!type) throw LayoutError("cell " + std::to_string(i) + " has no machine type");
      if (*type < 0 || *type >= num_machine_types)
        throw LayoutError("cell " + std::to_string(i) + " machine type out of range");
    }
    c.machine_type = type;
  }

  for (auto [u, v] : directed_edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw LayoutError("edge endpoint out of range");
    const int dx = std::abs(x_of(u) - x_of(v));
    const int dy = std::abs(y_of(u) - y_of(v));
    if (dx + dy != 1)
      throw LayoutError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") joins cells that are not grid-adjacent");
    auto& nb = cells_[static_cast<std::size_t>(u)].neighbors;
    if (std::find(nb.begin(), nb.end(), v) == nb.end()) nb.push_back(v);
  }
  for (auto& c : cells_) std::sort(c.neighbors.begin(), c.neighbors.end());

  std::size_t directed = 0;
  for (const auto& c : cells_) {
    for (int v : c.neighbors) {
      if (!has_edge(v, c.index))
        throw LayoutError("asymmetric edge (" + std::to_string(c.index) + "," + std::to_string(v) +
                          ")");
      ++directed;
    }
  }
  edge_count_ = directed / 2;

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> frontier;
  frontier.push(entry);
  seen[static_cast<std::size_t>(entry)] = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : cells_[static_cast<std::size_t>(u)].neighbors) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        frontier.push(v);
      }
    }
  }
  if (!seen[static_cast<std::size_t>(exit)]) throw LayoutError("exit is not reachable from entry");
}

bool FactoryLayout::has_edge(int from, int to) const {
  const auto& nb = cell(from).neighbors;
  return std::binary_search(nb.begin(), nb.end(), to);
}

std::optional<int> FactoryLayout::grid_neighbor(int cell, Direction dir) const {
  int x = x_of(cell);
  int y = y_of(cell);
  switch (dir) {
    case Direction::left: --x; break;
    case Direction::right: ++x; break;
    case Direction::up: --y; break;
    case Direction::down: ++y; break;
  }
  if (x < 0 || x >= width_ || y < 0 || y >= height_) return std::nullopt;
  return index_of(x, y);
}

FactoryLayout FactoryLayout::default_layout() {
  constexpr int w = 5;
  constexpr int h = 5;
  auto at = [](int x, int y) { return y * w + x; };
  const int entry = at(0, 2);
  const int exit = at(4, 2);

  std::vector<std::optional<int>> types(w * h);
  std::vector<Capacity> caps(w * h, Capacity::one());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) types[at(x, y)] = (x + 2 * y) % 5;
  types[entry] = std::nullopt;
  types[exit] = std::nullopt;
  caps[entry] = Capacity::all();
  caps[exit] = Capacity::all();

  const std::array hubs = {at(1, 1), at(3, 1), at(1, 3), at(3, 3)};
  std::vector<std::pair<int, int>> undirected;
  for (int hub : hubs) {
    caps[hub] = Capacity::half();
    const int x = hub % w;
    const int y = hub / w;
    undirected.insert(undirected.end(), {{hub, at(x - 1, y)},
                                         {hub, at(x + 1, y)},
                                         {hub, at(x, y - 1)},
                                         {hub, at(x, y + 1)}});
  }
  undirected.insert(undirected.end(), {
                                          {entry, at(0, 1)},
                                          {entry, at(0, 3)},
                                          {entry, at(1, 2)},
                                          {exit, at(4, 1)},
                                          {exit, at(4, 3)},
                                          {exit, at(3, 2)},
                                          {at(2, 2), at(2, 1)},
                                          {at(2, 2), at(2, 3)},
                                          {at(0, 0), at(1, 0)},
                                          {at(1, 0), at(2, 0)},
                                          {at(3, 0), at(4, 0)},
                                          {at(0, 4), at(1, 4)},
                                          {at(1, 4), at(2, 4)},
                                          {at(3, 4), at(4, 4)},
                                      });
  std::vector<std::pair<int, int>> edges;
  for (auto [u, v] : undirected) {
    edges.emplace_back(u, v);
    edges.emplace_back(v, u);
  }
  return FactoryLayout(w, h, entry, exit, 5, std::move(types), std::move(caps), edges);
}

namespace {

Capacity parse_capacity(const json& j) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v < 1) throw LayoutError("capacity < 1");
    return v == 1 ? Capacity::one() : Capacity::exactly(v);
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "1" || s == "ONE") return Capacity::one();
    if (s == "HALF") return Capacity::half();
    if (s == "ALL") return Capacity::all();
  }
  throw LayoutError("invalid capacity class: " + j.dump());
}

json capacity_to_json(const Capacity& c) {
  switch (c.kind) {
    case Capacity::Kind::one: return 1;
    case Capacity::Kind::half: return "HALF";
    case Capacity::Kind::all: return "ALL";
    case Capacity::Kind::fixed: return c.fixed;
  }
  return 1;
}

}  // namespace

FactoryLayout FactoryLayout::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw LayoutError(std::string("malformed layout document: ") + e.what());
  }
  try {
    const int width = doc.at("width").get<int>();
    const int height = doc.at("height").get<int>();
    const int entry = doc.at("entry").get<int>();
    const int exit = doc.at("exit").get<int>();

    std::vector<std::optional<int>> types;
    int max_type = -1;
    for (const auto& t : doc.at("machine_types")) {
      if (t.is_null()) {
        types.emplace_back();
      } else {
        types.emplace_back(t.get<int>());
        max_type = std::max(max_type, t.get<int>());
      }
    }
    std::vector<Capacity> caps;
    for (const auto& c : doc.at("capacity_classes")) caps.push_back(parse_capacity(c));

    std::vector<std::pair<int, int>> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw LayoutError("edge must be a pair of indices");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    const int num_types = doc.contains("num_machine_types") ? doc["num_machine_types"].get<int>()
                                                            : std::max(1, max_type + 1);
    return FactoryLayout(width, height, entry, exit, num_types, std::move(types), std::move(caps),
                         edges);
  } catch (const json::exception& e) {
    throw LayoutError(std::string("malformed layout document: ") + e.what());
  }
}

FactoryLayout FactoryLayout::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LayoutError("cannot open layout file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string FactoryLayout::to_json() const {
  json doc;
  doc["width"] = width_;
  doc["height"] = height_;
  doc["entry"] = entry_;
  doc["exit"] = exit_;
  doc["num_machine_types"] = num_machine_types_;
  json types = json::array();
  json caps = json::array();
  json edges = json::array();
  for (const auto& c : cells_) {
    types.push_back(c.machine_type ? json(*c.machine_type) : json(nullptr));
    caps.push_back(capacity_to_json(c.capacity));
    for (int v : c.neighbors) edges.push_back({c.index, v});
  }
  doc["machine_types"] = std::move(types);
  doc["capacity_classes"] = std::move(caps);
  doc["edges"] = std::move(edges);
  return doc.dump(2);
}

}  // namespace specshape
