#include "specshape/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "specshape/seed.hpp"

namespace specshape {

namespace {

TrainerConfig with_layout(TrainerConfig c) {
  if (!c.layout) c.layout = std::make_shared<const FactoryLayout>(FactoryLayout::default_layout());
  c.scheme.validate();
  if (c.episodes < 0) throw std::invalid_argument("episode count must be >= 0");
  if (c.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  return c;
}

LearnerConfig learner_config(const TrainerConfig& c) {
  LearnerConfig lc;
  lc.algorithm = c.algorithm;
  lc.n_agents = c.env.n_agents;
  lc.observation_size = static_cast<int>(observation_size(*c.layout));
  lc.hidden = c.hidden;
  lc.mixer_hidden = c.mixer_hidden;
  lc.gamma = c.gamma;
  lc.adam = c.adam;
  lc.target_period = c.target_period;
  lc.seed = derive_seed(c.seed, 3);
  return lc;
}

void append_observation(std::vector<float>& out, const std::vector<double>& obs) {
  for (double v : obs) out.push_back(static_cast<float>(v));
}

std::vector<CounterSnapshot> agent_counters(const EnvState& s) {
  std::vector<CounterSnapshot> out;
  out.reserve(s.agents.size());
  for (const auto& a : s.agents) out.push_back(a.counters);
  return out;
}

}  // namespace

std::string trainer_fingerprint(const TrainerConfig& c) {
  std::ostringstream out;
  out << algorithm_name(c.algorithm) << '|' << scheme_to_json(c.scheme) << '|' << c.env.n_agents << ','
      << c.env.tasks_per_bucket << ',' << c.env.n_buckets << ',' << c.env.step_limit << ','
      << c.env.emergency.enabled << '|' << c.episodes << '|' << c.gamma << '|' << c.absorbing << '|'
      << c.seed << '|' << c.target_period << ',' << c.batch_size << '|' << (c.layout ? c.layout->to_json() : std::string("default"));
  return out.str();
}

Trainer::Trainer(TrainerConfig config)
    : config_(with_layout(std::move(config))),
      shaping_{1.0, config_.algorithm == Algorithm::dqn ? ShapingScope::per_agent : ShapingScope::global,
               config_.absorbing},
      env_(config_.layout, config_.env),
      learner_(learner_config(config_)),
      buffer_(config_.replay),
      exploration_(config_.exploration),
      explore_rng_(derive_seed(config_.seed, 1)),
      replay_rng_(derive_seed(config_.seed, 2)) {}

double Trainer::per_beta() const {
  if (config_.episodes <= 1) return config_.per_beta_end;
  const double frac = std::min(1.0, static_cast<double>(episode_) / (config_.episodes - 1));
  return config_.per_beta_start + (config_.per_beta_end - config_.per_beta_start) * frac;
}

std::uint64_t Trainer::env_seed(int episode) const {
  return derive_seed(config_.seed, 1'000'000 + static_cast<std::uint64_t>(episode));
}

const EpisodeRecord& Trainer::train_episode() {
  const auto t0 = std::chrono::steady_clock::now();
  const int ep = episode_;
  const auto [weights, reset_required] = active_weights(config_.scheme, ep);
  if (reset_required) {
    exploration_.reset();
    learner_.reset_optimizers();
  }
  if (hook_) hook_(ep, *this);

  EpisodeRecord rec;
  rec.episode = ep;
  rec.epsilon_start = exploration_.value();
  rec.reset_applied = reset_required;

  const int n = config_.env.n_agents;
  const double limit = static_cast<double>(config_.env.step_limit);
  env_.reset(env_seed(ep));

  std::vector<std::vector<double>> raw_obs(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> obs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    raw_obs[ui] = env_.observe(i);
    obs[ui] = Eigen::Map<const Eigen::VectorXd>(raw_obs[ui].data(), static_cast<Eigen::Index>(raw_obs[ui].size()));
  }

  double loss_sum = 0.0;
  int loss_count = 0;
  auto store_and_learn = [&](Transition t) {
    buffer_.store(std::move(t));
    exploration_.advance();
    if (buffer_.size() >= config_.batch_size) {
      const auto sample = buffer_.sample(config_.batch_size, per_beta(), replay_rng_);
      const Batch batch = make_batch(buffer_, sample, n, learner_.config().observation_size);
      const auto result = learner_.learn(batch);
      buffer_.update_priorities(batch.indices, result.td_errors);
      loss_sum += result.loss;
      ++loss_count;
    }
  };

  StepResult step;
  while (!env_.episode_over()) {
    const EnvState& before = env_.state();
    const auto prev = agent_counters(before);
    const int prev_step = before.step;
    std::vector<std::uint8_t> was_live(static_cast<std::size_t>(n));
    JointAction actions(static_cast<std::size_t>(n));
    Transition t;
    t.actions.assign(static_cast<std::size_t>(n), static_cast<std::int8_t>(Action::noop));
    const double eps = exploration_.value();
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      was_live[ui] = before.agents[ui].done ? 0 : 1;
      if (!env_.can_act(i)) continue;
      const Action a = learner_.act(i, obs[ui], eps, explore_rng_);
      actions[ui] = a;
      t.actions[ui] = static_cast<std::int8_t>(a);
    }

    step = env_.step(actions);
    const EnvState& after = env_.state();
    const auto next = agent_counters(after);

    for (int i = 0; i < n; ++i) append_observation(t.observations, raw_obs[static_cast<std::size_t>(i)]);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      raw_obs[ui] = env_.observe(i);
      obs[ui] = Eigen::Map<const Eigen::VectorXd>(raw_obs[ui].data(), static_cast<Eigen::Index>(raw_obs[ui].size()));
      append_observation(t.next_observations, raw_obs[ui]);
      t.rewards.push_back(shaped_reward(prev[ui], next[ui], weights, shaping_));
      const auto& a = after.agents[ui];
      t.active.push_back(config_.absorbing ? 1 : was_live[ui]);
      t.agent_terminal.push_back(!config_.absorbing && was_live[ui] && a.done ? 1 : 0);
      t.next_noop_only.push_back(a.done || a.enqueued ? 1 : 0);
    }
    t.team_reward = shaped_reward(sum_counters(prev), sum_counters(next), weights, shaping_);
    t.terminal = !config_.absorbing && step.solved;
    t.step_fraction = static_cast<float>(prev_step / limit);
    t.next_step_fraction = static_cast<float>(after.step / limit);
    store_and_learn(std::move(t));
  }

  if (config_.absorbing) {
    const EnvState& last = env_.state();
    const auto final_counters = agent_counters(last);
    Transition t;
    for (int i = 0; i < n; ++i) append_observation(t.observations, raw_obs[static_cast<std::size_t>(i)]);
    t.next_observations = t.observations;
    t.actions.assign(static_cast<std::size_t>(n), static_cast<std::int8_t>(Action::noop));
    for (const auto& c : final_counters) t.rewards.push_back(shaped_reward(c, c, weights, shaping_, true));
    const CounterSnapshot team = sum_counters(final_counters);
    t.team_reward = shaped_reward(team, team, weights, shaping_, true);
    t.active.assign(static_cast<std::size_t>(n), 1);
    t.agent_terminal.assign(static_cast<std::size_t>(n), 1);
    t.next_noop_only.assign(static_cast<std::size_t>(n), 1);
    t.terminal = true;
    t.step_fraction = static_cast<float>(last.step / limit);
    t.next_step_fraction = t.step_fraction;
    store_and_learn(std::move(t));
  }

  const EnvState& fin = env_.state();
  rec.solved = fin.all_done();
  rec.steps_until_solved = (rec.solved ? fin.step : config_.env.step_limit) + (config_.absorbing ? 1 : 0);
  for (const auto& a : fin.agents) {
    rec.totals += a.counters;
    rec.wrong_machine_uses += a.wrong_machine_uses;
  }
  rec.soft_violations = rec.totals.path_violations + rec.totals.agent_collisions + rec.wrong_machine_uses;
  rec.hard_violations = rec.totals.emergency_violations;
  rec.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
  rec.updates = learner_.updates();
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ++episode_;
  records_.push_back(rec);
  return records_.back();
}

void Trainer::train(const std::function<void(const EpisodeRecord&)>& on_record) {
  while (!finished()) {
    const auto& rec = train_episode();
    if (on_record) on_record(rec);
  }
}

EvaluationResult Trainer::evaluate(std::uint64_t env_seed, double epsilon) const {
  FactoryEnv env(config_.layout, config_.env);
  env.reset(env_seed);
  std::mt19937_64 rng(derive_seed(env_seed, 7));
  EvaluationResult out;
  for (const auto& a : env.state().agents) out.initial_tasks.push_back(a.tasks);
  const int n = config_.env.n_agents;
  while (!env.episode_over()) {
    JointAction actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (!env.can_act(i)) continue;
      const auto o = env.observe(i);
      const Eigen::Map<const Eigen::VectorXd> v(o.data(), static_cast<Eigen::Index>(o.size()));
      actions[static_cast<std::size_t>(i)] = learner_.act(i, v, epsilon, rng);
    }
    env.step(actions);
  }
  auto& rec = out.record;
  const EnvState& fin = env.state();
  rec.episode = -1;
  rec.solved = fin.all_done();
  rec.steps_until_solved = (rec.solved ? fin.step : config_.env.step_limit) + (config_.absorbing ? 1 : 0);
  for (const auto& a : fin.agents) {
    rec.totals += a.counters;
    rec.wrong_machine_uses += a.wrong_machine_uses;
  }
  rec.soft_violations = rec.totals.path_violations + rec.totals.agent_collisions + rec.wrong_machine_uses;
  rec.hard_violations = rec.totals.emergency_violations;
  rec.epsilon_start = epsilon;
  return out;
}

namespace {

void write_record(std::ostream& out, const EpisodeRecord& r) {
  binio::write(out, r.episode);
  binio::write(out, r.steps_until_solved);
  binio::write<std::uint8_t>(out, r.solved);
  binio::write(out, r.soft_violations);
  binio::write(out, r.hard_violations);
  binio::write(out, r.wrong_machine_uses);
  binio::write(out, r.totals);
  binio::write(out, r.epsilon_start);
  binio::write<std::uint8_t>(out, r.reset_applied);
  binio::write(out, r.mean_loss);
  binio::write(out, r.updates);
  binio::write(out, r.wall_seconds);
}

EpisodeRecord read_record(std::istream& in) {
  EpisodeRecord r;
  r.episode = binio::read<int>(in);
  r.steps_until_solved = binio::read<int>(in);
  r.solved = binio::read<std::uint8_t>(in) != 0;
  r.soft_violations = binio::read<std::int64_t>(in);
  r.hard_violations = binio::read<std::int64_t>(in);
  r.wrong_machine_uses = binio::read<std::int64_t>(in);
  r.totals = binio::read<CounterSnapshot>(in);
  r.epsilon_start = binio::read<double>(in);
  r.reset_applied = binio::read<std::uint8_t>(in) != 0;
  r.mean_loss = binio::read<double>(in);
  r.updates = binio::read<std::int64_t>(in);
  r.wall_seconds = binio::read<double>(in);
  return r;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream s(state);
  s >> rng;
  if (!s) throw binio::FormatError("corrupt RNG state in checkpoint");
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    binio::write_tag(out, "TRNR", 1);
    binio::write_string(out, trainer_fingerprint(config_));
    binio::write<std::int32_t>(out, episode_);
    binio::write<double>(out, exploration_.anchor());
    binio::write<std::int64_t>(out, exploration_.steps_since_anchor());
    binio::write_string(out, rng_state(explore_rng_));
    binio::write_string(out, rng_state(replay_rng_));
    learner_.save(out);
    buffer_.save(out);
    binio::write<std::uint64_t>(out, records_.size());
    for (const auto& r : records_) write_record(out, r);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  binio::expect_tag(in, "TRNR", 1);
  if (binio::read_string(in) != trainer_fingerprint(config_))
    throw binio::FormatError("checkpoint was written for a different configuration");
  episode_ = binio::read<std::int32_t>(in);
  const double anchor = binio::read<double>(in);
  const auto steps = binio::read<std::int64_t>(in);
  exploration_.restore(anchor, steps);
  restore_rng(explore_rng_, binio::read_string(in));
  restore_rng(replay_rng_, binio::read_string(in));
  learner_ = Learner::load(in);
  buffer_ = ReplayBuffer::load(in);
  const auto count = binio::read<std::uint64_t>(in);
  records_.clear();
  for (std::uint64_t k = 0; k < count; ++k) records_.push_back(read_record(in));
  if (records_.size() != static_cast<std::size_t>(episode_))
    throw binio::FormatError("checkpoint record count does not match episode index");
}

}  // namespace specshape
