#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "specshape/env.hpp"
#include "specshape/nn.hpp"
#include "specshape/replay.hpp"

namespace specshape {

enum class Algorithm : std::uint8_t { dqn, vdn, qmix };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct LearnerConfig {
  Algorithm algorithm = Algorithm::dqn;
  int n_agents = 1;
  int observation_size = 0;
  std::vector<int> hidden = {64, 32};
  int mixer_hidden = 64;
  double gamma = 0.95;
  nn::AdamOptions adam;
  std::int64_t target_period = 4000;
  std::uint64_t seed = 0;

  /// All agents' observations followed by the normalized step index.
  int state_size() const { return n_agents * observation_size + 1; }
};

/// A sampled minibatch in column-per-sample layout.
struct Batch {
  std::vector<Eigen::MatrixXd> observations;       // per agent: obs x B
  std::vector<Eigen::MatrixXd> next_observations;  // per agent: obs x B
  Eigen::MatrixXi actions;                         // N x B
  Eigen::MatrixXd rewards;                         // N x B
  Eigen::RowVectorXd team_rewards;                 // 1 x B
  Eigen::MatrixXd active;                          // N x B, 0/1
  Eigen::MatrixXd agent_terminal;                  // N x B, 0/1
  Eigen::MatrixXd next_noop_only;                  // N x B, 0/1
  Eigen::RowVectorXd terminal;                     // 1 x B, 0/1
  Eigen::MatrixXd states;                          // S x B
  Eigen::MatrixXd next_states;                     // S x B
  Eigen::RowVectorXd weights;                      // importance weights
  std::vector<std::size_t> indices;

  Eigen::Index size() const { return terminal.size(); }
};

Batch make_batch(const ReplayBuffer& buffer, const ReplayBuffer::Sample& sample, int n_agents,
                 int observation_size);

/// Monotonic mixing network. The weights of a one-hidden-layer ELU mixer are
/// produced from the global state by hypernetworks; absolute values keep the
/// mixing weights non-negative so dQ_tot/dQ_i >= 0 everywhere.
class QMixer {
 public:
  enum Net { kHyperW1 = 0, kHyperB1 = 1, kHyperW2 = 2, kHyperV = 3 };

  struct Tape {
    std::array<nn::DenseNet::Tape, 4> hyper;
    Eigen::MatrixXd raw_w1;  // (N*H) x B
    Eigen::MatrixXd raw_w2;  // H x B
    Eigen::MatrixXd pre;     // H x B
    Eigen::MatrixXd hidden;  // H x B
    Eigen::MatrixXd agent_q; // N x B
  };

  struct Gradients {
    std::array<nn::Gradient, 4> nets;
    Eigen::MatrixXd agent_q;  // dL/dQ_i, N x B
  };

  QMixer() = default;
  QMixer(int n_agents, int state_size, int hidden, std::uint64_t seed, nn::AdamOptions adam);

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& agent_q, const Eigen::MatrixXd& states) const;
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& agent_q, const Eigen::MatrixXd& states,
                             Tape& tape) const;
  Gradients backward(const Tape& tape, const Eigen::RowVectorXd& dq_tot) const;
  void apply(const Gradients& grads);

  int n_agents() const { return n_agents_; }
  int hidden() const { return hidden_; }
  std::array<nn::TrainableNet, 4>& nets() { return nets_; }
  const std::array<nn::TrainableNet, 4>& nets() const { return nets_; }

 private:
  int n_agents_ = 0;
  int hidden_ = 0;
  std::array<nn::TrainableNet, 4> nets_;
};

/// Value-based multi-agent learner: independent DQN, VDN or QMIX over one
/// Q-network per agent (obs -> 64 ELU -> 32 ELU -> 6 linear) with hard-copied
/// target networks.
class Learner {
 public:
  struct LearnResult {
    double loss = 0.0;
    std::vector<double> td_errors;  // one per batch entry
  };

  explicit Learner(LearnerConfig config);

  const LearnerConfig& config() const { return config_; }
  Algorithm algorithm() const { return config_.algorithm; }

  Eigen::VectorXd q_values(int agent, const Eigen::VectorXd& observation) const;
  /// argmax over the online Q-values, lowest index on ties.
  Action greedy_action(int agent, const Eigen::VectorXd& observation) const;
  /// epsilon-greedy over all six actions.
  Action act(int agent, const Eigen::VectorXd& observation, double epsilon, std::mt19937_64& rng) const;

  /// One gradient step on the batch. Syncs the targets every target_period calls.
  LearnResult learn(const Batch& batch);
  void sync_targets();
  /// Zeroes every ADAM moment accumulator (agent nets and mixer).
  void reset_optimizers();
  bool optimizer_moments_zero() const;
  std::int64_t updates() const { return updates_; }

  /// Q_tot for one sample: sum for VDN, mixer output for QMIX. Throws for DQN.
  double mix(const Eigen::VectorXd& agent_q, const Eigen::VectorXd& state) const;
  /// dQ_tot/dQ_i at one sample.
  Eigen::VectorXd mix_gradient(const Eigen::VectorXd& agent_q, const Eigen::VectorXd& state) const;

  nn::TrainableNet& agent(int i) { return agents_.at(static_cast<std::size_t>(i)); }
  const nn::TrainableNet& agent(int i) const { return agents_.at(static_cast<std::size_t>(i)); }
  const nn::DenseNet& target(int i) const { return targets_.at(static_cast<std::size_t>(i)); }
  QMixer* mixer() { return mixer_ ? &*mixer_ : nullptr; }
  const QMixer* mixer() const { return mixer_ ? &*mixer_ : nullptr; }
  const QMixer* target_mixer() const { return target_mixer_ ? &*target_mixer_ : nullptr; }

  void save(std::ostream& out) const;
  static Learner load(std::istream& in);

 private:
  LearnResult learn_independent(const Batch& batch);
  LearnResult learn_joint(const Batch& batch);
  /// Per-agent max target Q over available actions, N x B.
  Eigen::MatrixXd next_max_q(const Batch& batch) const;

  LearnerConfig config_;
  std::vector<nn::TrainableNet> agents_;
  std::vector<nn::DenseNet> targets_;
  std::optional<QMixer> mixer_;
  std::optional<QMixer> target_mixer_;
  std::int64_t updates_ = 0;
};

}  // namespace specshape
