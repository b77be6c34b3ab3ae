#pragma once

#include <cstdint>

namespace specshape {

struct ExplorationConfig {
  double start = 1.0;
  double end = 0.05;
  std::int64_t decay_steps = 1000;
  double reset_value = 0.25;
};

/// Piecewise-linear epsilon: decays from its current anchor to `end` over
/// `decay_steps` environment steps, and can be re-anchored at `reset_value`.
class EpsilonSchedule {
 public:
  explicit EpsilonSchedule(ExplorationConfig config = {});

  double value() const;
  /// Advances one environment step.
  void advance() { ++steps_since_anchor_; }
  /// Restarts the decay from reset_value.
  void reset();

  const ExplorationConfig& config() const { return config_; }
  double anchor() const { return anchor_; }
  std::int64_t steps_since_anchor() const { return steps_since_anchor_; }
  void restore(double anchor, std::int64_t steps) {
    anchor_ = anchor;
    steps_since_anchor_ = steps;
  }

 private:
  ExplorationConfig config_;
  double anchor_;
  std::int64_t steps_since_anchor_ = 0;
};

}  // namespace specshape
