#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace specshape {

class LayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction { left, right, up, down };
inline constexpr std::array<Direction, 4> kDirections = {Direction::left, Direction::right,
                                                         Direction::up, Direction::down};

/// Capacity of a cell. ONE/HALF/ALL scale with the number of agents in an
/// episode; `fixed` holds an explicit count.
struct Capacity {
  enum class Kind { one, half, all, fixed };
  Kind kind = Kind::one;
  int fixed = 1;

  static Capacity one() { return {Kind::one, 1}; }
  static Capacity half() { return {Kind::half, 0}; }
  static Capacity all() { return {Kind::all, 0}; }
  static Capacity exactly(int n) { return {Kind::fixed, n}; }

  /// Resolved capacity for an episode with `n_agents` agents (always >= 1).
  int resolve(int n_agents) const;

  friend bool operator==(const Capacity&, const Capacity&) = default;
};

struct Cell {
  int index = 0;
  std::optional<int> machine_type;
  Capacity capacity;
  std::vector<int> neighbors;  // sorted, reachable via a path edge
};

/// Immutable description of the factory floor: a width x height grid of cells
/// (row-major, index = y * width + x, y grows downwards), per-cell machine
/// type and capacity, and a symmetric set of path edges between grid-adjacent
/// cells. Construction validates every invariant and throws LayoutError.
class FactoryLayout {
 public:
  FactoryLayout(int width, int height, int entry, int exit, int num_machine_types,
                std::vector<std::optional<int>> machine_types, std::vector<Capacity> capacities,
                std::span<const std::pair<int, int>> directed_edges);

  /// 5x5 floor with the entry on the west side and the exit on the east side
  /// of the middle row, four HALF-capacity hub cells and five machine types.
  static FactoryLayout default_layout();

  static FactoryLayout parse(std::string_view json_text);
  static FactoryLayout load(const std::filesystem::path& path);
  std::string to_json() const;

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  int entry() const { return entry_; }
  int exit() const { return exit_; }
  int num_machine_types() const { return num_machine_types_; }

  const Cell& cell(int index) const { return cells_.at(static_cast<std::size_t>(index)); }
  std::span<const Cell> cells() const { return cells_; }

  int capacity(int cell, int n_agents) const { return this->cell(cell).capacity.resolve(n_agents); }
  bool has_edge(int from, int to) const;
  /// Number of undirected path edges.
  std::size_t edge_count() const { return edge_count_; }

  /// Grid-adjacent cell in `dir`, regardless of whether a path edge exists.
  std::optional<int> grid_neighbor(int cell, Direction dir) const;

  int x_of(int cell) const { return cell % width_; }
  int y_of(int cell) const { return cell / width_; }
  int index_of(int x, int y) const { return y * width_ + x; }

 private:
  int width_;
  int height_;
  int entry_;
  int exit_;
  int num_machine_types_;
  std::vector<Cell> cells_;
  std::size_t edge_count_ = 0;
};

}  // namespace specshape
