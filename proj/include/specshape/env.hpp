#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "specshape/layout.hpp"

namespace specshape {

class EnvError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Action : int { left = 0, right = 1, up = 2, down = 3, enqueue = 4, noop = 5 };
inline constexpr int kActionCount = 6;

const char* action_name(Action a);

/// One optional action per agent; agents that are done or enqueued must not
/// submit an action.
using JointAction = std::vector<std::optional<Action>>;

/// Cumulative counters that feed the shaping potential.
struct CounterSnapshot {
  std::int64_t items_completed = 0;
  std::int64_t tasks_finished = 0;
  std::int64_t step_count = 0;
  std::int64_t machines_used = 0;
  std::int64_t path_violations = 0;
  std::int64_t agent_collisions = 0;
  std::int64_t emergency_violations = 0;

  CounterSnapshot& operator+=(const CounterSnapshot& o);
  friend CounterSnapshot operator+(CounterSnapshot a, const CounterSnapshot& b) { return a += b; }
  friend CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b);
  friend bool operator==(const CounterSnapshot&, const CounterSnapshot&) = default;

  /// True if every field of `next` is >= the matching field here.
  bool precedes(const CounterSnapshot& next) const;
};

CounterSnapshot sum_counters(std::span<const CounterSnapshot> parts);

/// Ordered task buckets of one item. Tasks within a bucket may be processed in
/// any order; buckets are processed front to back and dropped once empty.
class TaskBuckets {
 public:
  TaskBuckets() = default;
  explicit TaskBuckets(std::vector<std::vector<int>> buckets);

  bool empty() const { return buckets_.empty(); }
  std::size_t bucket_count() const { return buckets_.size(); }
  std::size_t task_count() const;
  const std::vector<std::vector<int>>& buckets() const { return buckets_; }
  std::span<const int> current() const;
  std::span<const int> next() const;

  /// Removes one instance of `task` from the current bucket. Returns false
  /// (and leaves the buckets untouched) if the current bucket lacks it.
  bool process(int task);

  friend bool operator==(const TaskBuckets&, const TaskBuckets&) = default;

 private:
  std::vector<std::vector<int>> buckets_;
};

struct AgentState {
  int id = 0;
  int cell = 0;
  TaskBuckets tasks;
  bool enqueued = false;
  bool done = false;
  CounterSnapshot counters;
  std::int64_t wrong_machine_uses = 0;
  std::size_t assigned_tasks = 0;
};

struct EmergencyConfig {
  bool enabled = false;
  double activation_prob = 0.05;
  int min_duration = 3;
  int max_duration = 6;
};

struct EnvConfig {
  int n_agents = 4;
  int tasks_per_bucket = 2;
  int n_buckets = 2;
  int step_limit = 50;
  EmergencyConfig emergency;
};

struct EnvState {
  std::vector<AgentState> agents;
  std::vector<std::deque<int>> queues;  // per cell, agent ids waiting at the machine
  int step = 0;
  bool emergency_active = false;
  int emergency_remaining = 0;

  int occupancy(int cell) const;
  bool all_done() const;
};

struct StepResult {
  std::vector<CounterSnapshot> deltas;
  std::vector<std::int64_t> wrong_machine_deltas;
  bool done = false;    // episode over (solved or step limit)
  bool solved = false;  // every agent done
};

/// Seeded simulation of the factory Markov game.
///
/// Step order: emergency check on submitted actions, machine processing of
/// queue heads enqueued in earlier steps, movement/enqueue in a per-step
/// random agent order, done transition at the exit, emergency process update.
class FactoryEnv {
 public:
  FactoryEnv(std::shared_ptr<const FactoryLayout> layout, EnvConfig config);

  void reset(std::uint64_t seed);
  StepResult step(const JointAction& actions);

  const EnvState& state() const { return state_; }
  const FactoryLayout& layout() const { return *layout_; }
  std::shared_ptr<const FactoryLayout> layout_ptr() const { return layout_; }
  const EnvConfig& config() const { return config_; }

  /// True if the agent takes an action this step (not done, not enqueued).
  bool can_act(int agent) const;
  bool episode_over() const;

  std::size_t observation_size() const;
  std::vector<double> observe(int agent) const;

  std::string render_text() const;
  std::string render_svg() const;

  /// Test hook: place the environment in an arbitrary state. Queues are
  /// rebuilt from the agents' `enqueued` flags in id order.
  void set_state(EnvState state);

 private:
  void validate_actions(const JointAction& actions) const;
  void update_emergency();

  std::shared_ptr<const FactoryLayout> layout_;
  EnvConfig config_;
  EnvState state_;
  std::mt19937_64 rng_;
};

std::size_t observation_size(const FactoryLayout& layout);

}  // namespace specshape
