#include "specshape/experiment.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "specshape/seed.hpp"

namespace specshape {

using nlohmann::json;

void ScenarioConfig::validate() const {
  if (scenario < 1 || scenario > 4) throw ConfigError("scenario must be 1..4");
  if (n_agents < 1) throw ConfigError("need at least one agent");
  if (algorithms.empty()) throw ConfigError("no algorithms selected");
  if (schemes.empty()) throw ConfigError("no reward schemes selected");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (step_limit < 1) throw ConfigError("step limit must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (seeds < 1) throw ConfigError("need at least one seed");
  if (tasks_per_bucket < 1 || n_buckets < 1) throw ConfigError("task counts must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint interval must be >= 0");
  if (target_period < 1) throw ConfigError("target period must be >= 1");
  if (scenario == 4 && (gamma != 1.0 || !absorbing || !emergency))
    throw ConfigError("scenario 4 requires gamma = 1, absorbing mode and emergencies");
  for (const auto& s : schemes) (void)resolve_scheme(*this, s);
}

ScenarioConfig scenario_preset(int scenario) {
  ScenarioConfig c;
  c.scenario = scenario;
  switch (scenario) {
    case 1:
      c.n_agents = 4;
      c.algorithms = {Algorithm::dqn};
      c.schemes = {"r0", "r1", "r2", "r3", "r4", "r5"};
      break;
    case 2:
      c.n_agents = 8;
      c.algorithms = {Algorithm::dqn, Algorithm::vdn, Algorithm::qmix};
      c.schemes = {"r1", "r5"};
      break;
    case 3:
      c.n_agents = 8;
      c.algorithms = {Algorithm::dqn, Algorithm::vdn, Algorithm::qmix};
      c.schemes = {"r1", "r5", "rx"};
      c.rx_boundaries = {2000, 3000};
      break;
    case 4:
      c.n_agents = 6;
      c.algorithms = {Algorithm::dqn};
      c.schemes = {"r5", "rx"};
      c.rx_boundaries = {2500};
      c.gamma = 1.0;
      c.absorbing = true;
      c.emergency = true;
      break;
    default:
      throw ConfigError("scenario must be 1..4");
  }
  return c;
}

RewardScheme resolve_scheme(const ScenarioConfig& cfg, const std::string& name) {
  if (auto it = cfg.custom_schemes.find(name); it != cfg.custom_schemes.end()) return it->second;
  if (name == "rx") return scheduled_scheme(cfg.rx_boundaries);
  try {
    return static_scheme(name);
  } catch (const RewardError&) {
    throw ConfigError("unknown reward scheme '" + name + "'");
  }
}

ScenarioConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config document: ") + e.what());
  }
  try {
    ScenarioConfig c = scenario_preset(doc.value("scenario", 1));
    if (doc.contains("agents")) c.n_agents = doc["agents"].get<int>();
    if (doc.contains("algorithms")) {
      c.algorithms.clear();
      for (const auto& a : doc["algorithms"]) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    if (doc.contains("schemes")) c.schemes = doc["schemes"].get<std::vector<std::string>>();
    if (doc.contains("episodes")) c.episodes = doc["episodes"].get<int>();
    if (doc.contains("step_limit")) c.step_limit = doc["step_limit"].get<int>();
    if (doc.contains("gamma")) c.gamma = doc["gamma"].get<double>();
    if (doc.contains("absorbing")) c.absorbing = doc["absorbing"].get<bool>();
    if (doc.contains("emergency")) c.emergency = doc["emergency"].get<bool>();
    if (doc.contains("seeds")) c.seeds = doc["seeds"].get<int>();
    if (doc.contains("base_seed")) c.base_seed = doc["base_seed"].get<std::uint64_t>();
    if (doc.contains("rx_boundaries")) c.rx_boundaries = doc["rx_boundaries"].get<std::vector<int>>();
    if (doc.contains("tasks_per_bucket")) c.tasks_per_bucket = doc["tasks_per_bucket"].get<int>();
    if (doc.contains("buckets")) c.n_buckets = doc["buckets"].get<int>();
    if (doc.contains("checkpoint_every")) c.checkpoint_every = doc["checkpoint_every"].get<int>();
    if (doc.contains("target_period")) c.target_period = doc["target_period"].get<std::int64_t>();
    if (doc.contains("layout")) {
      const auto& l = doc["layout"];
      if (l.is_string()) {
        std::filesystem::path p = l.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.layout = std::make_shared<const FactoryLayout>(FactoryLayout::load(p));
      } else {
        c.layout = std::make_shared<const FactoryLayout>(FactoryLayout::parse(l.dump()));
      }
    }
    if (doc.contains("reward_schemes")) {
      for (const auto& s : doc["reward_schemes"]) {
        RewardScheme scheme = scheme_from_json(s.dump());
        c.custom_schemes[scheme.name] = std::move(scheme);
      }
    }
    c.validate();
    for (const auto& name : c.schemes) resolve_scheme(c, name);
    return c;
  } catch (const LayoutError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

TrainerConfig make_trainer_config(const ScenarioConfig& cfg, Algorithm algorithm,
                                  const std::string& scheme, int seed_index) {
  TrainerConfig t;
  t.algorithm = algorithm;
  t.scheme = resolve_scheme(cfg, scheme);
  t.layout = cfg.layout ? cfg.layout : std::make_shared<const FactoryLayout>(FactoryLayout::default_layout());
  t.env.n_agents = cfg.n_agents;
  t.env.tasks_per_bucket = cfg.tasks_per_bucket;
  t.env.n_buckets = cfg.n_buckets;
  t.env.step_limit = cfg.step_limit;
  t.env.emergency.enabled = cfg.emergency;
  t.episodes = cfg.episodes;
  t.gamma = cfg.gamma;
  t.absorbing = cfg.absorbing;
  t.target_period = cfg.target_period;
  // Same seed index -> same environment and initialization across schemes.
  t.seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(seed_index));
  return t;
}

std::string RunKey::label() const {
  return std::string(algorithm_name(algorithm)) + "_" + scheme + "_seed" + std::to_string(seed);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RunResult execute_run(const ScenarioConfig& cfg, const RunKey& key, const RunOptions& options) {
  Trainer trainer(make_trainer_config(cfg, key.algorithm, key.scheme, key.seed));
  std::filesystem::path ckpt;
  std::filesystem::path records_path;
  if (!options.out_dir.empty()) {
    const auto runs = options.out_dir / "runs";
    std::filesystem::create_directories(runs);
    ckpt = runs / (key.label() + ".ckpt");
    records_path = runs / (key.label() + ".csv");
    if (options.resume && std::filesystem::exists(ckpt)) trainer.load_checkpoint(ckpt);
  }

  std::ofstream records_out;
  if (!records_path.empty()) {
    write_text(records_path, records_to_csv(trainer.records()));
    records_out.open(records_path, std::ios::binary | std::ios::app);
  }
  while (!trainer.finished()) {
    const auto& rec = trainer.train_episode();
    if (records_out.is_open()) {
      const std::string row = records_to_csv(std::span(&rec, 1));
      records_out << row.substr(row.find('\n') + 1);
      records_out.flush();
    }
    if (options.progress) options.progress(key, rec);
    if (!ckpt.empty() && cfg.checkpoint_every > 0 && trainer.episode() % cfg.checkpoint_every == 0 &&
        !trainer.finished())
      trainer.save_checkpoint(ckpt);
  }
  if (!ckpt.empty()) {
    const auto model = std::filesystem::path(ckpt).replace_extension(".model");
    std::ofstream out(model, std::ios::binary | std::ios::trunc);
    trainer.learner().save(out);
    if (!out) throw std::runtime_error("failed writing " + model.string());
    out.close();
    std::filesystem::remove(ckpt);
  }
  return {key, trainer.records()};
}

}  // namespace

std::vector<RunResult> run_scenario(const ScenarioConfig& cfg, const RunOptions& options) {
  cfg.validate();
  std::vector<RunKey> keys;
  for (Algorithm a : cfg.algorithms)
    for (const auto& s : cfg.schemes)
      for (int seed = 0; seed < cfg.seeds; ++seed) keys.push_back({a, s, seed});

  std::vector<RunResult> results(keys.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < keys.size(); k = next++) {
      try {
        results[k] = execute_run(cfg, keys[k], options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = keys.size();
      }
    }
  };

  int jobs = options.jobs > 0 ? options.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(keys.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace specshape
