#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace specshape {

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One joint environment transition. Per-agent arrays have n_agents entries;
/// observations are stored agent-major (agent 0's observation first).
struct Transition {
  std::vector<float> observations;
  std::vector<float> next_observations;
  std::vector<std::int8_t> actions;
  std::vector<double> rewards;             // per-agent shaped rewards
  double team_reward = 0.0;                // shaped reward on the summed counters
  std::vector<std::uint8_t> active;        // agent's sample contributes to independent learning
  std::vector<std::uint8_t> agent_terminal;
  std::vector<std::uint8_t> next_noop_only;  // only noop is available to the agent in the next state
  bool terminal = false;
  float step_fraction = 0.0f;  // step index / step limit, part of the mixer state
  float next_step_fraction = 0.0f;
};

struct ReplayConfig {
  std::size_t capacity = 20000;
  double alpha = 0.6;
  double priority_epsilon = 1e-6;
};

/// FIFO experience buffer with proportional prioritized sampling backed by a
/// sum tree over priority^alpha.
class ReplayBuffer {
 public:
  struct Sample {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  // importance weights, max-normalized over the batch
  };

  explicit ReplayBuffer(ReplayConfig config = {});

  /// Appends a transition with the current maximum priority, evicting the
  /// oldest entry when full.
  void store(Transition t);

  /// Draws `batch` indices with probability p_i^alpha / sum p^alpha.
  Sample sample(std::size_t batch, double beta, std::mt19937_64& rng) const;

  /// Sets priorities to |td_error| + priority_epsilon.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors);
  /// Sets a raw priority (>= 0).
  void set_priority(std::size_t index, double priority);

  double priority(std::size_t index) const { return priorities_.at(index); }
  double max_priority() const { return max_priority_; }
  /// Probability that one draw returns `index`.
  double sample_probability(std::size_t index) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return config_.capacity; }
  bool empty() const { return size_ == 0; }
  const ReplayConfig& config() const { return config_; }
  const Transition& at(std::size_t index) const;
  /// Slot the next store() writes to.
  std::size_t next_slot() const { return next_; }

  void save(std::ostream& out) const;
  static ReplayBuffer load(std::istream& in);

 private:
  void set_leaf(std::size_t index, double value);
  double total() const { return tree_[1]; }

  ReplayConfig config_;
  std::vector<Transition> entries_;
  std::vector<double> priorities_;
  std::vector<double> tree_;  // 1-based heap, leaves at [leaf_base_, leaf_base_ + capacity)
  std::size_t leaf_base_ = 1;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace specshape
