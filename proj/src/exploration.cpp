#include "specshape/exploration.hpp"

#include <algorithm>
#include <stdexcept>

namespace specshape {

EpsilonSchedule::EpsilonSchedule(ExplorationConfig config) : config_(config), anchor_(config.start) {
  if (config_.decay_steps < 1) throw std::invalid_argument("epsilon decay needs at least one step");
  if (config_.end < 0.0 || config_.end > 1.0 || config_.start < config_.end ||
      config_.reset_value < config_.end || config_.start > 1.0 || config_.reset_value > 1.0)
    throw std::invalid_argument("epsilon bounds must satisfy 0 <= end <= start, reset <= 1");
}

double EpsilonSchedule::value() const {
  const double frac = std::min(1.0, static_cast<double>(steps_since_anchor_) /
                                        static_cast<double>(config_.decay_steps));
  if (frac >= 1.0) return config_.end;
  return anchor_ + (config_.end - anchor_) * frac;
}

void EpsilonSchedule::reset() {
  anchor_ = config_.reset_value;
  steps_since_anchor_ = 0;
}

}  // namespace specshape
