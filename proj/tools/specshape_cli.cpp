#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "specshape/experiment.hpp"
#include "specshape/layout.hpp"

namespace fs = std::filesystem;
using namespace specshape;

namespace {

struct RunArgs {
  std::optional<int> scenario;
  std::string config;
  std::optional<int> agents;
  std::optional<int> episodes;
  std::optional<int> seeds;
  std::optional<std::uint64_t> base_seed;
  std::vector<std::string> schemes;
  std::vector<std::string> algos;
  std::vector<int> boundaries;
  std::optional<std::int64_t> target_period;
  std::string layout;
  std::string out = "out";
  int jobs = 0;
  int smooth = 1;
  bool fresh = false;
  bool quiet = false;
};

nlohmann::json summary_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["scenario"] = cfg.scenario;
  j["agents"] = cfg.n_agents;
  j["algorithms"] = nlohmann::json::array();
  for (auto a : cfg.algorithms) j["algorithms"].push_back(algorithm_name(a));
  j["schemes"] = cfg.schemes;
  j["episodes"] = cfg.episodes;
  j["step_limit"] = cfg.step_limit;
  j["gamma"] = cfg.gamma;
  j["absorbing"] = cfg.absorbing;
  j["emergency"] = cfg.emergency;
  j["seeds"] = cfg.seeds;
  j["base_seed"] = cfg.base_seed;
  j["rx_boundaries"] = cfg.rx_boundaries;
  j["tasks_per_bucket"] = cfg.tasks_per_bucket;
  j["buckets"] = cfg.n_buckets;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["target_period"] = cfg.target_period;
  if (cfg.layout) j["layout"] = nlohmann::json::parse(cfg.layout->to_json());
  return j;
}

int do_run(const RunArgs& a) {
  ScenarioConfig cfg;
  if (!a.config.empty()) {
    cfg = load_config(a.config);
    if (a.scenario && *a.scenario != cfg.scenario)
      throw ConfigError("--scenario disagrees with the scenario in the config document");
  } else {
    if (!a.scenario) throw ConfigError("--scenario or --config is required");
    cfg = scenario_preset(*a.scenario);
  }
  if (a.agents) cfg.n_agents = *a.agents;
  if (a.episodes) cfg.episodes = *a.episodes;
  if (a.seeds) cfg.seeds = *a.seeds;
  if (a.base_seed) cfg.base_seed = *a.base_seed;
  if (!a.schemes.empty()) cfg.schemes = a.schemes;
  if (!a.algos.empty()) {
    cfg.algorithms.clear();
    for (const auto& s : a.algos) cfg.algorithms.push_back(parse_algorithm(s));
  }
  if (!a.boundaries.empty()) cfg.rx_boundaries = a.boundaries;
  if (a.target_period) cfg.target_period = *a.target_period;
  if (!a.layout.empty()) cfg.layout = std::make_shared<const FactoryLayout>(FactoryLayout::load(a.layout));
  cfg.validate();
  if (cfg.seeds < 2) throw ConfigError("at least two seeds are needed for confidence intervals");

  const fs::path out = a.out;
  fs::create_directories(out);
  {
    std::ofstream f(out / "config.json", std::ios::binary | std::ios::trunc);
    f << summary_json(cfg).dump(2) << '\n';
  }

  RunOptions options;
  options.out_dir = out;
  options.jobs = a.jobs;
  options.resume = !a.fresh;
  std::mutex io;
  const auto started = std::chrono::steady_clock::now();
  if (!a.quiet) {
    options.progress = [&](const RunKey& key, const EpisodeRecord& r) {
      if ((r.episode + 1) % 100 != 0 && r.episode + 1 != cfg.episodes) return;
      std::lock_guard lock(io);
      std::fprintf(stderr, "[%s] episode %d/%d steps %d soft %lld hard %lld eps %.3f\n", key.label().c_str(),
                   r.episode + 1, cfg.episodes, r.steps_until_solved, static_cast<long long>(r.soft_violations),
                   static_cast<long long>(r.hard_violations), r.epsilon_start);
    };
  }
  const auto results = run_scenario(cfg, options);
  const auto curves = aggregate(results, a.smooth);
  emit_csv(curves, out / "curves.csv");
  if (!a.quiet) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::fprintf(stderr, "wrote %s (%zu series) in %.1f s\n", (out / "curves.csv").string().c_str(), curves.size(),
                 secs);
  }
  return 0;
}

int do_plot(const std::string& in, const std::string& metric, const std::string& out) {
  fs::path src = in;
  if (fs::is_directory(src)) src /= "curves.csv";
  const auto curves = read_csv(src);
  emit_plot(curves, parse_metric(metric), out);
  return 0;
}

int do_validate(const std::string& path) {
  const FactoryLayout layout = FactoryLayout::load(path);
  int machines = 0;
  for (int c = 0; c < layout.cell_count(); ++c)
    if (layout.cell(c).machine_type) ++machines;
  std::printf("ok: %dx%d grid, %d machines of %d types, %zu edges, entry %d, exit %d\n", layout.width(),
              layout.height(), machines, layout.num_machine_types(), layout.edge_count(), layout.entry(),
              layout.exit());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent factory training with potential-based reward shaping"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train a scenario and write curves.csv");
  run_cmd->add_option("--scenario", run.scenario, "scenario preset 1-4")->check(CLI::Range(1, 4));
  run_cmd->add_option("--config", run.config, "JSON config document")->check(CLI::ExistingFile);
  run_cmd->add_option("--agents", run.agents, "number of agents")->check(CLI::PositiveNumber);
  run_cmd->add_option("--episodes", run.episodes, "episodes per run")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seeds", run.seeds, "independent seeds")->check(CLI::PositiveNumber);
  run_cmd->add_option("--base-seed", run.base_seed, "base seed");
  run_cmd->add_option("--scheme", run.schemes, "reward schemes (r0..r5, rx or custom)")->delimiter(',');
  run_cmd->add_option("--algo", run.algos, "algorithms (dqn, vdn, qmix)")->delimiter(',');
  run_cmd->add_option("--rx-boundaries", run.boundaries, "episodes where rx adds components")->delimiter(',');
  run_cmd->add_option("--target-period", run.target_period, "learner updates between target syncs")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--layout", run.layout, "layout JSON file")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "output directory")->capture_default_str();
  run_cmd->add_option("--jobs", run.jobs, "worker threads (0: all cores)");
  run_cmd->add_option("--smooth", run.smooth, "moving-average window for curves")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--fresh", run.fresh, "ignore existing checkpoints");
  run_cmd->add_flag("-q,--quiet", run.quiet, "no progress output");

  std::string plot_in, plot_metric = "steps", plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "render curves as SVG");
  plot_cmd->add_option("--in", plot_in, "run directory or curves CSV")->required();
  plot_cmd->add_option("--metric", plot_metric, "steps, soft or hard")
      ->check(CLI::IsMember({"steps", "soft", "hard"}))
      ->capture_default_str();
  plot_cmd->add_option("--out", plot_out, "SVG file")->required();

  std::string layout_path;
  auto* validate_cmd = app.add_subcommand("validate-layout", "check a layout JSON file");
  validate_cmd->add_option("file", layout_path, "layout JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*plot_cmd) return do_plot(plot_in, plot_metric, plot_out);
    if (*validate_cmd) return do_validate(layout_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
