#include "specshape/learner.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace specshape {
namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

LearnerConfig small_config(Algorithm algo, int n_agents = 2, int obs = 4) {
  LearnerConfig c;
  c.algorithm = algo;
  c.n_agents = n_agents;
  c.observation_size = obs;
  c.hidden = {8, 6};
  c.mixer_hidden = 5;
  c.seed = 42;
  return c;
}

Batch random_batch(const LearnerConfig& cfg, Eigen::Index B, std::mt19937_64& rng) {
  Batch b;
  const int N = cfg.n_agents;
  for (int i = 0; i < N; ++i) {
    b.observations.push_back(random_matrix(cfg.observation_size, B, rng));
    b.next_observations.push_back(random_matrix(cfg.observation_size, B, rng));
  }
  std::uniform_int_distribution<int> act(0, kActionCount - 1);
  b.actions.resize(N, B);
  for (Eigen::Index k = 0; k < b.actions.size(); ++k) b.actions.data()[k] = act(rng);
  b.rewards = random_matrix(N, B, rng);
  b.team_rewards = b.rewards.colwise().sum();
  b.active = Eigen::MatrixXd::Ones(N, B);
  b.agent_terminal = Eigen::MatrixXd::Zero(N, B);
  b.next_noop_only = Eigen::MatrixXd::Zero(N, B);
  b.terminal = Eigen::RowVectorXd::Zero(B);
  b.states.resize(cfg.state_size(), B);
  b.next_states.resize(cfg.state_size(), B);
  for (int i = 0; i < N; ++i) {
    b.states.middleRows(i * cfg.observation_size, cfg.observation_size) = b.observations[static_cast<std::size_t>(i)];
    b.next_states.middleRows(i * cfg.observation_size, cfg.observation_size) =
        b.next_observations[static_cast<std::size_t>(i)];
  }
  b.states.row(cfg.state_size() - 1).setConstant(0.3);
  b.next_states.row(cfg.state_size() - 1).setConstant(0.32);
  b.weights = Eigen::RowVectorXd::Ones(B);
  for (Eigen::Index k = 0; k < B; ++k) b.indices.push_back(static_cast<std::size_t>(k));
  return b;
}

void set_output_bias(Learner& learner, int agent, const std::vector<double>& q) {
  auto& net = learner.agent(agent).net;
  const std::size_t last = net.layers().size() - 1;
  net.weights(last).setZero();
  for (int a = 0; a < kActionCount; ++a) net.bias(last)(a) = q[static_cast<std::size_t>(a)];
}

TEST(LearnerTest, ArchitectureMatchesDefaults) {
  LearnerConfig c;
  c.observation_size = 42;
  c.n_agents = 3;
  const Learner l(c);
  const auto layers = l.agent(0).net.layers();
  ASSERT_EQ(layers.size(), 3u);
  EXPECT_EQ(layers[0].outputs, 64);
  EXPECT_EQ(layers[1].outputs, 32);
  EXPECT_EQ(layers[2].outputs, 6);
  EXPECT_EQ(layers[0].activation, nn::Activation::elu);
  EXPECT_EQ(layers[1].activation, nn::Activation::elu);
  EXPECT_EQ(layers[2].activation, nn::Activation::linear);
  EXPECT_FALSE(l.agent(0).net == l.agent(1).net);
  EXPECT_EQ(l.target(2), l.agent(2).net);
}

TEST(LearnerTest, GreedyArgmaxAndTies) {
  Learner l(small_config(Algorithm::dqn, 1));
  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(4);
  set_output_bias(l, 0, {0, 0, 3, 0, 0, 0});
  EXPECT_EQ(l.greedy_action(0, obs), Action::up);
  set_output_bias(l, 0, {1, 1, 1, 1, 1, 1});
  EXPECT_EQ(l.greedy_action(0, obs), Action::left);
  std::mt19937_64 rng(0);
  EXPECT_EQ(l.act(0, obs, 0.0, rng), Action::left);
}

TEST(LearnerTest, FullExplorationIsUniform) {
  Learner l(small_config(Algorithm::dqn, 1));
  set_output_bias(l, 0, {0, 0, 3, 0, 0, 0});
  std::mt19937_64 rng(12);
  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(4);
  std::array<int, kActionCount> hits{};
  constexpr int kDraws = 10000;
  for (int k = 0; k < kDraws; ++k) ++hits[static_cast<std::size_t>(l.act(0, obs, 1.0, rng))];
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - kDraws / 6.0) * (h - kDraws / 6.0) / (kDraws / 6.0);
  EXPECT_LT(chi2, 15.09);  // 99% quantile, 5 dof
}

TEST(LearnerTest, VdnSumIsExact) {
  Learner l(small_config(Algorithm::vdn));
  Eigen::VectorXd q(2);
  q << 1.5, 2.5;
  EXPECT_EQ(l.mix(q, Eigen::VectorXd::Zero(9)), 4.0);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd r = random_matrix(2, 1, rng, 10.0);
    EXPECT_NEAR(l.mix(r, Eigen::VectorXd::Zero(9)), r(0) + r(1), 1e-12);
  }
  EXPECT_EQ(l.mix_gradient(q, Eigen::VectorXd::Zero(9)), Eigen::VectorXd::Ones(2));
}

TEST(LearnerTest, DqnHasNoMixer) {
  const Learner l(small_config(Algorithm::dqn));
  EXPECT_THROW(l.mix(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(9)), std::logic_error);
}

TEST(LearnerTest, QmixIsMonotonic) {
  const auto cfg = small_config(Algorithm::qmix, 3);
  const Learner l(cfg);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 300; ++k) {
    const Eigen::VectorXd q = random_matrix(3, 1, rng, 5.0);
    const Eigen::VectorXd s = random_matrix(cfg.state_size(), 1, rng, 2.0);
    const Eigen::VectorXd g = l.mix_gradient(q, s);
    EXPECT_GE(g.minCoeff(), -1e-9);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd up = q;
      up(i) += 0.37;
      EXPECT_GE(l.mix(up, s), l.mix(q, s) - 1e-12);
    }
  }
}

TEST(LearnerTest, QmixGradientMatchesFiniteDifferences) {
  const auto cfg = small_config(Algorithm::qmix, 2);
  const Learner l(cfg);
  const QMixer& mixer = *l.mixer();
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd q = random_matrix(2, 3, rng);
  const Eigen::MatrixXd s = random_matrix(cfg.state_size(), 3, rng);
  const Eigen::RowVectorXd c = random_matrix(1, 3, rng);
  QMixer::Tape tape;
  mixer.forward(q, s, tape);
  const QMixer::Gradients g = mixer.backward(tape, c);

  auto loss = [&](const QMixer& m, const Eigen::MatrixXd& qq) { return m.forward(qq, s).dot(c); };
  constexpr double h = 1e-6;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    Eigen::MatrixXd qp = q, qm = q;
    qp.data()[k] += h;
    qm.data()[k] -= h;
    EXPECT_NEAR(g.agent_q.data()[k], (loss(mixer, qp) - loss(mixer, qm)) / (2 * h), 1e-6);
  }
  for (int net = 0; net < 4; ++net) {
    const auto count = mixer.nets()[static_cast<std::size_t>(net)].net.parameter_count();
    for (Eigen::Index p = 0; p < count; p += 3) {
      QMixer plus = mixer, minus = mixer;
      plus.nets()[static_cast<std::size_t>(net)].net.parameters()(p) += h;
      minus.nets()[static_cast<std::size_t>(net)].net.parameters()(p) -= h;
      const double fd = (loss(plus, q) - loss(minus, q)) / (2 * h);
      EXPECT_NEAR(g.nets[static_cast<std::size_t>(net)](p), fd, 1e-6 * std::max(1.0, std::abs(fd)))
          << "net " << net << " param " << p;
    }
  }
}

// On terminal transitions the TD target is the bare reward.
TEST(LearnerTest, TerminalTargetIsReward) {
  for (Algorithm algo : {Algorithm::dqn, Algorithm::vdn, Algorithm::qmix}) {
    auto cfg = small_config(algo, 1);
    Learner l(cfg);
    std::mt19937_64 rng(5);
    Batch b = random_batch(cfg, 4, rng);
    b.rewards.setConstant(2.0);
    b.team_rewards.setConstant(2.0);
    b.terminal.setOnes();
    b.agent_terminal.setOnes();
    Eigen::RowVectorXd q_before(4);
    for (Eigen::Index k = 0; k < 4; ++k) {
      const Eigen::VectorXd qs = l.q_values(0, b.observations[0].col(k));
      q_before(k) = algo == Algorithm::dqn ? qs(b.actions(0, k)) : l.mix(qs.segment(b.actions(0, k), 1), b.states.col(k));
    }
    const auto r = l.learn(b);
    for (Eigen::Index k = 0; k < 4; ++k)
      EXPECT_NEAR(r.td_errors[static_cast<std::size_t>(k)], std::abs(q_before(k) - 2.0), 1e-9) << algorithm_name(algo);
  }
}

TEST(LearnerTest, DqnPriorityIsMeanAbsTdOverActiveAgents) {
  auto cfg = small_config(Algorithm::dqn, 3);
  cfg.gamma = 0.9;
  Learner l(cfg);
  std::mt19937_64 rng(9);
  Batch b = random_batch(cfg, 5, rng);
  b.active(1, 2) = 0.0;
  b.agent_terminal(2, 3) = 1.0;
  b.next_noop_only(0, 1) = 1.0;
  std::vector<double> expected(5, 0.0);
  for (Eigen::Index k = 0; k < 5; ++k) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      if (b.active(i, k) < 0.5) continue;
      const Eigen::VectorXd q = l.q_values(i, b.observations[static_cast<std::size_t>(i)].col(k));
      const Eigen::VectorXd qn = l.target(i).forward(b.next_observations[static_cast<std::size_t>(i)].col(k));
      const double next = b.next_noop_only(i, k) > 0.5 ? qn(static_cast<int>(Action::noop)) : qn.maxCoeff();
      const double y = b.rewards(i, k) + 0.9 * next * (1.0 - b.agent_terminal(i, k));
      sum += std::abs(q(b.actions(i, k)) - y);
      ++n;
    }
    expected[static_cast<std::size_t>(k)] = sum / n;
  }
  const auto r = l.learn(b);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(r.td_errors[k], expected[k], 1e-12);
}

TEST(LearnerTest, VdnTargetUsesSummedMaxima) {
  auto cfg = small_config(Algorithm::vdn, 2);
  cfg.gamma = 0.95;
  Learner l(cfg);
  std::mt19937_64 rng(4);
  Batch b = random_batch(cfg, 3, rng);
  std::vector<double> expected;
  for (Eigen::Index k = 0; k < 3; ++k) {
    double q_tot = 0.0, next = 0.0;
    for (int i = 0; i < 2; ++i) {
      q_tot += l.q_values(i, b.observations[static_cast<std::size_t>(i)].col(k))(b.actions(i, k));
      next += l.target(i).forward(b.next_observations[static_cast<std::size_t>(i)].col(k)).maxCoeff();
    }
    expected.push_back(std::abs(q_tot - (b.team_rewards(k) + 0.95 * next)));
  }
  const auto r = l.learn(b);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.td_errors[k], expected[k], 1e-12);
}

TEST(LearnerTest, TargetSyncCadence) {
  auto cfg = small_config(Algorithm::qmix, 2);
  cfg.target_period = 5;
  Learner l(cfg);
  const nn::DenseNet initial = l.target(0);
  std::mt19937_64 rng(6);
  const Batch b = random_batch(cfg, 8, rng);
  for (int k = 1; k <= 4; ++k) {
    l.learn(b);
    EXPECT_EQ(l.target(0), initial);
  }
  l.learn(b);
  EXPECT_EQ(l.updates(), 5);
  EXPECT_EQ(l.target(0), l.agent(0).net);
  EXPECT_FALSE(l.target(0) == initial);
  EXPECT_EQ(l.target_mixer()->nets()[0].net, l.mixer()->nets()[0].net);
  l.learn(b);
  EXPECT_FALSE(l.target(0) == l.agent(0).net);
}

TEST(LearnerTest, DefaultSyncEvery4000) {
  LearnerConfig c;
  EXPECT_EQ(c.target_period, 4000);
}

TEST(LearnerTest, ResetOptimizersZeroesMoments) {
  auto cfg = small_config(Algorithm::qmix, 2);
  Learner l(cfg);
  std::mt19937_64 rng(8);
  const Batch b1 = random_batch(cfg, 8, rng);
  const Batch b2 = random_batch(cfg, 8, rng);
  for (int k = 0; k < 3; ++k) l.learn(b1);
  EXPECT_FALSE(l.optimizer_moments_zero());
  l.reset_optimizers();
  EXPECT_TRUE(l.optimizer_moments_zero());
  const Eigen::VectorXd before = l.agent(0).net.parameters();
  l.learn(b2);
  // First ADAM step after a reset moves each coordinate by at most lr.
  const Eigen::VectorXd step = l.agent(0).net.parameters() - before;
  EXPECT_LE(step.cwiseAbs().maxCoeff(), cfg.adam.learning_rate + 1e-12);
}

TEST(LearnerTest, SaveLoadRoundTrip) {
  auto cfg = small_config(Algorithm::qmix, 2);
  Learner l(cfg);
  std::mt19937_64 rng(10);
  const Batch b = random_batch(cfg, 8, rng);
  l.learn(b);
  std::stringstream s;
  l.save(s);
  Learner back = Learner::load(s);
  EXPECT_EQ(back.updates(), 1);
  EXPECT_EQ(back.agent(1).net, l.agent(1).net);
  EXPECT_EQ(back.mixer()->nets()[3].net, l.mixer()->nets()[3].net);
  const auto r1 = l.learn(b);
  const auto r2 = back.learn(b);
  EXPECT_EQ(r1.td_errors, r2.td_errors);
  EXPECT_EQ(back.agent(0).net, l.agent(0).net);
}

TEST(LearnerTest, ShapeMismatch) {
  Learner l(small_config(Algorithm::dqn, 2));
  std::mt19937_64 rng(1);
  const Batch b = random_batch(small_config(Algorithm::dqn, 3), 4, rng);
  EXPECT_THROW(l.learn(b), nn::ShapeError);
}

// Deterministic two-state problem: action a leads to state a % 2 with reward
// R[s][a]. A linear Q-network over the one-hot state is a table, so DQN must
// reach the value-iteration fixed point.
TEST(LearnerTest, TabularDqnConvergesToValueIteration) {
  const double R[2][kActionCount] = {{1.0, 0.0, 0.5, -0.5, 0.2, 0.1}, {0.0, 2.0, -1.0, 0.3, 0.0, 0.4}};
  constexpr double gamma = 0.9;
  double Q[2][kActionCount] = {};
  for (int it = 0; it < 2000; ++it) {
    double V[2];
    for (int s = 0; s < 2; ++s) V[s] = *std::max_element(Q[s], Q[s] + kActionCount);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < kActionCount; ++a) Q[s][a] = R[s][a] + gamma * V[a % 2];
  }

  LearnerConfig cfg;
  cfg.algorithm = Algorithm::dqn;
  cfg.n_agents = 1;
  cfg.observation_size = 2;
  cfg.hidden = {};
  cfg.gamma = gamma;
  cfg.target_period = 100;
  cfg.adam.learning_rate = 0.05;
  cfg.seed = 1;
  Learner l(cfg);

  const Eigen::Index B = 2 * kActionCount;
  Batch b;
  b.observations.assign(1, Eigen::MatrixXd::Zero(2, B));
  b.next_observations.assign(1, Eigen::MatrixXd::Zero(2, B));
  b.actions.resize(1, B);
  b.rewards.resize(1, B);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < kActionCount; ++a) {
      const Eigen::Index k = s * kActionCount + a;
      b.observations[0](s, k) = 1.0;
      b.next_observations[0](a % 2, k) = 1.0;
      b.actions(0, k) = a;
      b.rewards(0, k) = R[s][a];
    }
  b.team_rewards = b.rewards.row(0);
  b.active = Eigen::MatrixXd::Ones(1, B);
  b.agent_terminal = Eigen::MatrixXd::Zero(1, B);
  b.next_noop_only = Eigen::MatrixXd::Zero(1, B);
  b.terminal = Eigen::RowVectorXd::Zero(B);
  b.states = Eigen::MatrixXd::Zero(3, B);
  b.next_states = Eigen::MatrixXd::Zero(3, B);
  b.weights = Eigen::RowVectorXd::Ones(B);

  for (int it = 0; it < 30000; ++it) l.learn(b);
  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd q = l.q_values(0, Eigen::VectorXd::Unit(2, s));
    for (int a = 0; a < kActionCount; ++a) EXPECT_NEAR(q(a), Q[s][a], 1e-2) << "s=" << s << " a=" << a;
  }
}

}  // namespace
}  // namespace specshape
