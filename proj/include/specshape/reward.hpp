#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "specshape/env.hpp"

namespace specshape {

class RewardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Magnitudes of the seven potential components. alpha and beta enter the
/// potential positively, the others negatively.
struct PotentialWeights {
  double alpha = 0.0;  // item completed
  double beta = 0.0;   // task finished
  double delta = 0.0;  // step cost
  double zeta = 0.0;   // machine operation cost
  double eta = 0.0;    // path violation
  double theta = 0.0;  // agent collision
  double iota = 0.0;   // emergency violation

  PotentialWeights scaled(double c) const;
  void validate() const;
  friend bool operator==(const PotentialWeights&, const PotentialWeights&) = default;
};

double potential(const CounterSnapshot& counters, const PotentialWeights& w);

enum class ShapingScope { per_agent, global };

struct ShapingConfig {
  double gamma_shape = 1.0;
  ShapingScope scope = ShapingScope::per_agent;
  bool episodic_absorbing = false;
};

/// gamma_shape * phi(next) - phi(prev). When `next_is_absorbing` is set and
/// the config is in episodic-absorbing mode the next potential is taken as 0.
/// Throws RewardError if any counter decreased.
double shaped_reward(const CounterSnapshot& prev, const CounterSnapshot& next,
                     const PotentialWeights& w, const ShapingConfig& cfg,
                     bool next_is_absorbing = false);

struct ScheduleEntry {
  int episode = 0;
  PotentialWeights weights;
};

struct RewardScheme {
  std::string name;
  PotentialWeights initial;
  std::vector<ScheduleEntry> schedule;  // strictly increasing episodes
  bool reset_on_change = true;

  bool is_static() const { return schedule.empty(); }
  const PotentialWeights& final_weights() const;
  void validate() const;
};

struct ActiveWeights {
  PotentialWeights weights;
  bool reset_required = false;
};

/// Weights in force during `episode`; reset_required is set exactly on the
/// episode where a schedule entry takes effect (and the scheme asks for it).
ActiveWeights active_weights(const RewardScheme& scheme, int episode);

/// Built-in schemes r0..r5.
RewardScheme static_scheme(std::string_view name);

/// The curriculum scheme: beta, delta, eta from the start; zeta, theta and
/// iota added at the boundaries. One boundary adds all three, two boundaries
/// add {zeta, theta} then {iota}, three add one component each.
RewardScheme scheduled_scheme(std::span<const int> boundaries, std::string name = "rx");

/// r0..r5 plus rx with the given boundaries.
std::map<std::string, RewardScheme> scheme_table(std::span<const int> rx_boundaries);
std::map<std::string, RewardScheme> scheme_table();

/// Parses a scheme from a JSON object:
/// {"name": "...", "initial": {"beta": 1.0, ...},
///  "schedule": [{"episode": 100, "weights": {...}}], "reset_on_change": true}
RewardScheme scheme_from_json(std::string_view json_text);
std::string scheme_to_json(const RewardScheme& scheme);

}  // namespace specshape
