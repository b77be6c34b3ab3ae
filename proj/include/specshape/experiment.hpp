#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "specshape/layout.hpp"
#include "specshape/learner.hpp"
#include "specshape/reward.hpp"
#include "specshape/trainer.hpp"

namespace specshape {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  int scenario = 1;
  int n_agents = 4;
  std::vector<Algorithm> algorithms = {Algorithm::dqn};
  std::vector<std::string> schemes = {"r0", "r1", "r2", "r3", "r4", "r5"};
  int episodes = 5000;
  int step_limit = 50;
  double gamma = 0.95;
  bool absorbing = false;
  bool emergency = false;
  int seeds = 10;
  std::uint64_t base_seed = 0;
  std::vector<int> rx_boundaries = {2000, 3000};
  int tasks_per_bucket = 2;
  int n_buckets = 2;
  std::shared_ptr<const FactoryLayout> layout;  // null: default layout
  std::map<std::string, RewardScheme> custom_schemes;
  int checkpoint_every = 500;
  std::int64_t target_period = 4000;  // learner updates between target syncs

  /// Throws ConfigError on any inconsistency, including scenario 4 without
  /// gamma = 1, absorbing mode and emergencies.
  void validate() const;
};

/// The four evaluation presets.
ScenarioConfig scenario_preset(int scenario);

/// Parses a JSON config document. A "scenario" key selects the preset that
/// the remaining keys override. Relative layout paths resolve against
/// `base_dir`.
ScenarioConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

RewardScheme resolve_scheme(const ScenarioConfig& cfg, const std::string& name);
TrainerConfig make_trainer_config(const ScenarioConfig& cfg, Algorithm algorithm,
                                  const std::string& scheme, int seed_index);

struct RunKey {
  Algorithm algorithm = Algorithm::dqn;
  std::string scheme;
  int seed = 0;

  std::string label() const;
  friend bool operator==(const RunKey&, const RunKey&) = default;
};

struct RunResult {
  RunKey key;
  std::vector<EpisodeRecord> records;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  int jobs = 0;                   // 0: hardware concurrency
  bool resume = true;
  std::function<void(const RunKey&, const EpisodeRecord&)> progress;
};

/// Trains every (algorithm, scheme, seed) combination. Runs are independent
/// and executed on a worker pool; results come back in a fixed order. With an
/// output directory, per-run records are written incrementally and a
/// checkpoint is kept every `checkpoint_every` episodes so interrupted runs
/// resume where they stopped. A finished run replaces its checkpoint with
/// the trained networks (`runs/<label>.model`, readable by Learner::load).
std::vector<RunResult> run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

enum class Metric { steps, soft, hard };
const char* metric_name(Metric m);
Metric parse_metric(std::string_view name);
double metric_value(const EpisodeRecord& r, Metric m);

struct AggregateCurve {
  Metric metric = Metric::steps;
  std::string scheme;
  std::string algorithm;
  std::vector<double> mean;
  std::vector<double> ci_low;
  std::vector<double> ci_high;

  std::size_t episodes() const { return mean.size(); }
};

/// Trailing moving average; window 1 returns the input.
std::vector<double> moving_average(std::span<const double> values, int window);

/// Per-episode mean and normal 95% interval (mean +- 1.96 * sd / sqrt(n),
/// sample sd) over seeds. Needs >= 2 seeds of equal length.
AggregateCurve aggregate_series(std::span<const std::vector<double>> per_seed);

/// One curve per (metric, scheme, algorithm).
std::vector<AggregateCurve> aggregate(std::span<const RunResult> runs, int smoothing_window = 1);

/// CSV with header `episode,metric,scheme,algorithm,mean,ci_low,ci_high`,
/// shortest round-trip float formatting, LF line endings.
void emit_csv(std::span<const AggregateCurve> curves, const std::filesystem::path& path);
std::string curves_to_csv(std::span<const AggregateCurve> curves);
std::vector<AggregateCurve> parse_csv(std::string_view text);
std::vector<AggregateCurve> read_csv(const std::filesystem::path& path);

/// Per-episode records of one run as CSV.
std::string records_to_csv(std::span<const EpisodeRecord> records);

/// SVG line plot of the curves for `metric` with shaded confidence bands.
std::string plot_svg(std::span<const AggregateCurve> curves, Metric metric);
void emit_plot(std::span<const AggregateCurve> curves, Metric metric, const std::filesystem::path& path);

}  // namespace specshape
