#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "specshape/env.hpp"
#include "specshape/exploration.hpp"
#include "specshape/learner.hpp"
#include "specshape/replay.hpp"
#include "specshape/reward.hpp"

namespace specshape {

struct TrainerConfig {
  Algorithm algorithm = Algorithm::dqn;
  RewardScheme scheme = static_scheme("r1");
  std::shared_ptr<const FactoryLayout> layout;  // null: default layout
  EnvConfig env;
  int episodes = 5000;
  double gamma = 0.95;
  bool absorbing = false;  // episodic PBRS with a zero-potential absorbing step
  ExplorationConfig exploration;
  ReplayConfig replay;
  std::size_t batch_size = 64;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;
  std::int64_t target_period = 4000;
  nn::AdamOptions adam;
  std::vector<int> hidden = {64, 32};
  int mixer_hidden = 64;
  std::uint64_t seed = 0;
};

struct EpisodeRecord {
  int episode = 0;
  int steps_until_solved = 0;
  bool solved = false;
  std::int64_t soft_violations = 0;  // path violations + collisions + wrong-machine uses
  std::int64_t hard_violations = 0;  // emergency violations
  std::int64_t wrong_machine_uses = 0;
  CounterSnapshot totals;
  double epsilon_start = 0.0;
  bool reset_applied = false;
  double mean_loss = 0.0;
  std::int64_t updates = 0;  // learner updates performed so far
  double wall_seconds = 0.0;
};

struct EvaluationResult {
  EpisodeRecord record;
  std::vector<TaskBuckets> initial_tasks;
};

/// Runs episodes of one (algorithm, reward scheme, seed) combination,
/// interleaving environment steps with one learner update per step.
///
/// Per-agent (DQN) learning uses each agent's own counters; VDN and QMIX use
/// the team counters. In absorbing mode every episode ends with one extra
/// transition into a zero-potential terminal state.
class Trainer {
 public:
  using EpisodeHook = std::function<void(int episode, const Trainer&)>;

  explicit Trainer(TrainerConfig config);

  /// Trains one episode and appends its record.
  const EpisodeRecord& train_episode();
  /// Trains until config().episodes episodes are recorded.
  void train(const std::function<void(const EpisodeRecord&)>& on_record = {});

  /// One greedy (or epsilon-greedy) episode without learning.
  EvaluationResult evaluate(std::uint64_t env_seed, double epsilon = 0.0) const;

  /// Called at the start of every training episode, after any scheduled reset.
  void set_episode_start_hook(EpisodeHook hook) { hook_ = std::move(hook); }

  const TrainerConfig& config() const { return config_; }
  int episode() const { return episode_; }
  bool finished() const { return episode_ >= config_.episodes; }
  const std::vector<EpisodeRecord>& records() const { return records_; }
  const Learner& learner() const { return learner_; }
  Learner& learner() { return learner_; }
  const EpsilonSchedule& exploration() const { return exploration_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const ShapingConfig& shaping() const { return shaping_; }
  const FactoryEnv& env() const { return env_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores a checkpoint written for the same configuration.
  void load_checkpoint(const std::filesystem::path& path);

 private:
  double per_beta() const;
  std::uint64_t env_seed(int episode) const;

  TrainerConfig config_;
  ShapingConfig shaping_;
  FactoryEnv env_;
  Learner learner_;
  ReplayBuffer buffer_;
  EpsilonSchedule exploration_;
  std::mt19937_64 explore_rng_;
  std::mt19937_64 replay_rng_;
  int episode_ = 0;
  std::vector<EpisodeRecord> records_;
  EpisodeHook hook_;
};

/// Trainer configuration fingerprint stored in checkpoints.
std::string trainer_fingerprint(const TrainerConfig& config);

}  // namespace specshape
