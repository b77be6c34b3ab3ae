#include "specshape/learner.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "binio.hpp"
#include "specshape/seed.hpp"

namespace specshape {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::dqn: return "dqn";
    case Algorithm::vdn: return "vdn";
    case Algorithm::qmix: return "qmix";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "dqn") return Algorithm::dqn;
  if (name == "vdn") return Algorithm::vdn;
  if (name == "qmix") return Algorithm::qmix;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

Batch make_batch(const ReplayBuffer& buffer, const ReplayBuffer::Sample& sample, int n_agents,
                 int obs_size) {
  const auto B = static_cast<Eigen::Index>(sample.indices.size());
  const int S = n_agents * obs_size + 1;
  Batch b;
  b.observations.assign(static_cast<std::size_t>(n_agents), Eigen::MatrixXd(obs_size, B));
  b.next_observations.assign(static_cast<std::size_t>(n_agents), Eigen::MatrixXd(obs_size, B));
  b.actions.resize(n_agents, B);
  b.rewards.resize(n_agents, B);
  b.team_rewards.resize(B);
  b.active.resize(n_agents, B);
  b.agent_terminal.resize(n_agents, B);
  b.next_noop_only.resize(n_agents, B);
  b.terminal.resize(B);
  b.states.resize(S, B);
  b.next_states.resize(S, B);
  b.weights.resize(B);
  b.indices = sample.indices;

  for (Eigen::Index k = 0; k < B; ++k) {
    const Transition& t = buffer.at(sample.indices[static_cast<std::size_t>(k)]);
    if (static_cast<int>(t.actions.size()) != n_agents ||
        static_cast<int>(t.observations.size()) != n_agents * obs_size)
      throw std::invalid_argument("transition shape does not match learner");
    for (int i = 0; i < n_agents; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      for (int d = 0; d < obs_size; ++d) {
        const auto flat = static_cast<std::size_t>(i * obs_size + d);
        b.observations[ui](d, k) = t.observations[flat];
        b.next_observations[ui](d, k) = t.next_observations[flat];
        b.states(i * obs_size + d, k) = t.observations[flat];
        b.next_states(i * obs_size + d, k) = t.next_observations[flat];
      }
      b.actions(i, k) = t.actions[ui];
      b.rewards(i, k) = t.rewards[ui];
      b.active(i, k) = t.active[ui];
      b.agent_terminal(i, k) = t.agent_terminal[ui];
      b.next_noop_only(i, k) = t.next_noop_only[ui];
    }
    b.states(S - 1, k) = t.step_fraction;
    b.next_states(S - 1, k) = t.next_step_fraction;
    b.team_rewards(k) = t.team_reward;
    b.terminal(k) = t.terminal ? 1.0 : 0.0;
    b.weights(k) = sample.weights[static_cast<std::size_t>(k)];
  }
  return b;
}

// ---------------------------------------------------------------------------
// QMixer

QMixer::QMixer(int n_agents, int state_size, int hidden, std::uint64_t seed, nn::AdamOptions adam)
    : n_agents_(n_agents), hidden_(hidden) {
  using nn::Activation;
  using nn::DenseNet;
  nets_[kHyperW1] = nn::TrainableNet(
      DenseNet::init({{state_size, n_agents * hidden, Activation::linear}}, derive_seed(seed, 0)), adam);
  nets_[kHyperB1] =
      nn::TrainableNet(DenseNet::init({{state_size, hidden, Activation::linear}}, derive_seed(seed, 1)), adam);
  nets_[kHyperW2] =
      nn::TrainableNet(DenseNet::init({{state_size, hidden, Activation::linear}}, derive_seed(seed, 2)), adam);
  nets_[kHyperV] = nn::TrainableNet(
      DenseNet::init({{state_size, hidden, Activation::elu}, {hidden, 1, Activation::linear}},
                     derive_seed(seed, 3)),
      adam);
}

Eigen::RowVectorXd QMixer::forward(const Eigen::MatrixXd& agent_q, const Eigen::MatrixXd& states) const {
  Tape tape;
  return forward(agent_q, states, tape);
}

Eigen::RowVectorXd QMixer::forward(const Eigen::MatrixXd& agent_q, const Eigen::MatrixXd& states,
                                   Tape& tape) const {
  if (agent_q.rows() != n_agents_ || agent_q.cols() != states.cols())
    throw nn::ShapeError("mixer input shape mismatch");
  const Eigen::Index B = agent_q.cols();
  const int H = hidden_;
  tape.raw_w1 = nets_[kHyperW1].net.forward_batch(states, tape.hyper[kHyperW1]);
  const Eigen::MatrixXd b1 = nets_[kHyperB1].net.forward_batch(states, tape.hyper[kHyperB1]);
  tape.raw_w2 = nets_[kHyperW2].net.forward_batch(states, tape.hyper[kHyperW2]);
  const Eigen::MatrixXd v = nets_[kHyperV].net.forward_batch(states, tape.hyper[kHyperV]);
  tape.agent_q = agent_q;
  tape.pre.resize(H, B);
  tape.hidden.resize(H, B);

  Eigen::RowVectorXd q_tot(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    // Column b of raw_w1 reshaped to H x N (column i holds agent i's weights).
    Eigen::Map<const Eigen::MatrixXd> w1(tape.raw_w1.col(b).data(), H, n_agents_);
    tape.pre.col(b) = w1.cwiseAbs() * agent_q.col(b) + b1.col(b);
    tape.hidden.col(b) = tape.pre.col(b).unaryExpr([](double x) { return nn::elu(x); });
    q_tot(b) = tape.raw_w2.col(b).cwiseAbs().dot(tape.hidden.col(b)) + v(0, b);
  }
  return q_tot;
}

QMixer::Gradients QMixer::backward(const Tape& tape, const Eigen::RowVectorXd& dq_tot) const {
  const Eigen::Index B = tape.agent_q.cols();
  if (dq_tot.size() != B) throw nn::ShapeError("mixer gradient shape mismatch");
  const int H = hidden_;
  const auto sign = [](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); };

  Eigen::MatrixXd d_raw_w1(static_cast<Eigen::Index>(n_agents_) * H, B);
  Eigen::MatrixXd d_b1(H, B);
  Eigen::MatrixXd d_raw_w2(H, B);
  Eigen::MatrixXd d_v(1, B);
  Gradients g;
  g.agent_q.resize(n_agents_, B);

  for (Eigen::Index b = 0; b < B; ++b) {
    const double gq = dq_tot(b);
    const auto raw_w2 = tape.raw_w2.col(b);
    d_raw_w2.col(b) = gq * tape.hidden.col(b).cwiseProduct(raw_w2.unaryExpr(sign));
    d_v(0, b) = gq;
    const Eigen::VectorXd d_pre =
        (gq * raw_w2.cwiseAbs()).cwiseProduct(tape.pre.col(b).unaryExpr([](double x) { return nn::elu_grad(x); }));
    d_b1.col(b) = d_pre;
    Eigen::Map<const Eigen::MatrixXd> raw_w1(tape.raw_w1.col(b).data(), H, n_agents_);
    Eigen::Map<Eigen::MatrixXd> d_w1(d_raw_w1.col(b).data(), H, n_agents_);
    d_w1 = (d_pre * tape.agent_q.col(b).transpose()).cwiseProduct(raw_w1.unaryExpr(sign));
    g.agent_q.col(b) = raw_w1.cwiseAbs().transpose() * d_pre;
  }

  g.nets[kHyperW1] = nets_[kHyperW1].net.backward(tape.hyper[kHyperW1], d_raw_w1);
  g.nets[kHyperB1] = nets_[kHyperB1].net.backward(tape.hyper[kHyperB1], d_b1);
  g.nets[kHyperW2] = nets_[kHyperW2].net.backward(tape.hyper[kHyperW2], d_raw_w2);
  g.nets[kHyperV] = nets_[kHyperV].net.backward(tape.hyper[kHyperV], d_v);
  return g;
}

void QMixer::apply(const Gradients& grads) {
  for (std::size_t k = 0; k < nets_.size(); ++k) nets_[k].apply(grads.nets[k]);
}

// ---------------------------------------------------------------------------
// Learner

Learner::Learner(LearnerConfig config) : config_(std::move(config)) {
  if (config_.n_agents < 1 || config_.observation_size < 1)
    throw std::invalid_argument("learner needs at least one agent and a non-empty observation");
  if (config_.target_period < 1) throw std::invalid_argument("target period must be positive");
  std::vector<int> sizes{config_.observation_size};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(kActionCount);
  for (int i = 0; i < config_.n_agents; ++i) {
    agents_.emplace_back(nn::DenseNet::mlp(sizes, derive_seed(config_.seed, static_cast<std::uint64_t>(i))),
                         config_.adam);
    targets_.push_back(agents_.back().net);
  }
  if (config_.algorithm == Algorithm::qmix) {
    mixer_.emplace(config_.n_agents, config_.state_size(), config_.mixer_hidden,
                   derive_seed(config_.seed, 1000), config_.adam);
    target_mixer_ = mixer_;
  }
}

Eigen::VectorXd Learner::q_values(int agent, const Eigen::VectorXd& observation) const {
  return this->agent(agent).net.forward(observation);
}

Action Learner::greedy_action(int agent, const Eigen::VectorXd& observation) const {
  const Eigen::VectorXd q = q_values(agent, observation);
  int best = 0;
  for (int a = 1; a < q.size(); ++a)
    if (q(a) > q(best)) best = a;
  return static_cast<Action>(best);
}

Action Learner::act(int agent, const Eigen::VectorXd& observation, double epsilon,
                    std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, kActionCount - 1);
    return static_cast<Action>(pick(rng));
  }
  return greedy_action(agent, observation);
}

Eigen::MatrixXd Learner::next_max_q(const Batch& batch) const {
  const Eigen::Index B = batch.size();
  Eigen::MatrixXd out(config_.n_agents, B);
  constexpr int kNoop = static_cast<int>(Action::noop);
  for (int i = 0; i < config_.n_agents; ++i) {
    const Eigen::MatrixXd qn = targets_[static_cast<std::size_t>(i)].forward_batch(
        batch.next_observations[static_cast<std::size_t>(i)]);
    for (Eigen::Index b = 0; b < B; ++b)
      out(i, b) = batch.next_noop_only(i, b) > 0.5 ? qn(kNoop, b) : qn.col(b).maxCoeff();
  }
  return out;
}

Learner::LearnResult Learner::learn(const Batch& batch) {
  if (static_cast<int>(batch.observations.size()) != config_.n_agents ||
      batch.actions.rows() != config_.n_agents)
    throw nn::ShapeError("batch agent count does not match learner");
  LearnResult result = config_.algorithm == Algorithm::dqn ? learn_independent(batch) : learn_joint(batch);
  ++updates_;
  if (updates_ % config_.target_period == 0) sync_targets();
  return result;
}

Learner::LearnResult Learner::learn_independent(const Batch& batch) {
  const Eigen::Index B = batch.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  const Eigen::MatrixXd next_q = next_max_q(batch);
  Eigen::RowVectorXd abs_td_sum = Eigen::RowVectorXd::Zero(B);
  Eigen::RowVectorXd active_count = Eigen::RowVectorXd::Zero(B);
  double loss = 0.0;

  for (int i = 0; i < config_.n_agents; ++i) {
    auto& agent = agents_[static_cast<std::size_t>(i)];
    nn::DenseNet::Tape tape;
    const Eigen::MatrixXd q = agent.net.forward_batch(batch.observations[static_cast<std::size_t>(i)], tape);
    Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(q.rows(), B);
    for (Eigen::Index b = 0; b < B; ++b) {
      if (batch.active(i, b) < 0.5) continue;
      const int a = batch.actions(i, b);
      const double y =
          batch.rewards(i, b) + config_.gamma * next_q(i, b) * (1.0 - batch.agent_terminal(i, b));
      const double td = q(a, b) - y;
      loss += batch.weights(b) * td * td * inv_b;
      grad_out(a, b) = 2.0 * batch.weights(b) * td * inv_b;
      abs_td_sum(b) += std::abs(td);
      active_count(b) += 1.0;
    }
    agent.apply(agent.net.backward(tape, grad_out));
  }

  LearnResult r;
  r.loss = loss / config_.n_agents;
  r.td_errors.resize(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b)
    r.td_errors[static_cast<std::size_t>(b)] = active_count(b) > 0 ? abs_td_sum(b) / active_count(b) : 0.0;
  return r;
}

Learner::LearnResult Learner::learn_joint(const Batch& batch) {
  const Eigen::Index B = batch.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  const int N = config_.n_agents;

  std::vector<nn::DenseNet::Tape> tapes(static_cast<std::size_t>(N));
  std::vector<Eigen::MatrixXd> q(static_cast<std::size_t>(N));
  Eigen::MatrixXd chosen(N, B);
  for (int i = 0; i < N; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    q[ui] = agents_[ui].net.forward_batch(batch.observations[ui], tapes[ui]);
    for (Eigen::Index b = 0; b < B; ++b) chosen(i, b) = q[ui](batch.actions(i, b), b);
  }

  const Eigen::MatrixXd next_q = next_max_q(batch);
  Eigen::RowVectorXd q_tot;
  Eigen::RowVectorXd next_tot;
  QMixer::Tape mix_tape;
  if (config_.algorithm == Algorithm::vdn) {
    q_tot = chosen.colwise().sum();
    next_tot = next_q.colwise().sum();
  } else {
    q_tot = mixer_->forward(chosen, batch.states, mix_tape);
    next_tot = target_mixer_->forward(next_q, batch.next_states);
  }

  const Eigen::RowVectorXd y =
      batch.team_rewards.array() + config_.gamma * next_tot.array() * (1.0 - batch.terminal.array());
  const Eigen::RowVectorXd td = q_tot - y;
  const Eigen::RowVectorXd d_tot = 2.0 * inv_b * batch.weights.cwiseProduct(td);

  Eigen::MatrixXd d_chosen;
  if (config_.algorithm == Algorithm::vdn) {
    d_chosen = d_tot.replicate(N, 1);
  } else {
    QMixer::Gradients g = mixer_->backward(mix_tape, d_tot);
    mixer_->apply(g);
    d_chosen = std::move(g.agent_q);
  }
  for (int i = 0; i < N; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(kActionCount, B);
    for (Eigen::Index b = 0; b < B; ++b) grad_out(batch.actions(i, b), b) = d_chosen(i, b);
    agents_[ui].apply(agents_[ui].net.backward(tapes[ui], grad_out));
  }

  LearnResult r;
  r.loss = (batch.weights.array() * td.array().square()).sum() * inv_b;
  r.td_errors.resize(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) r.td_errors[static_cast<std::size_t>(b)] = std::abs(td(b));
  return r;
}

void Learner::sync_targets() {
  for (std::size_t i = 0; i < agents_.size(); ++i) targets_[i] = agents_[i].net;
  if (mixer_) target_mixer_ = mixer_;
}

void Learner::reset_optimizers() {
  for (auto& a : agents_) a.optimizer.reset();
  if (mixer_)
    for (auto& n : mixer_->nets()) n.optimizer.reset();
}

bool Learner::optimizer_moments_zero() const {
  for (const auto& a : agents_)
    if (!a.optimizer.moments_zero()) return false;
  if (mixer_)
    for (const auto& n : mixer_->nets())
      if (!n.optimizer.moments_zero()) return false;
  return true;
}

double Learner::mix(const Eigen::VectorXd& agent_q, const Eigen::VectorXd& state) const {
  switch (config_.algorithm) {
    case Algorithm::vdn: return agent_q.sum();
    case Algorithm::qmix: return mixer_->forward(agent_q, state)(0);
    case Algorithm::dqn: break;
  }
  throw std::logic_error("independent DQN has no mixer");
}

Eigen::VectorXd Learner::mix_gradient(const Eigen::VectorXd& agent_q, const Eigen::VectorXd& state) const {
  switch (config_.algorithm) {
    case Algorithm::vdn: return Eigen::VectorXd::Ones(agent_q.size());
    case Algorithm::qmix: {
      QMixer::Tape tape;
      mixer_->forward(agent_q, state, tape);
      return mixer_->backward(tape, Eigen::RowVectorXd::Ones(1)).agent_q.col(0);
    }
    case Algorithm::dqn: break;
  }
  throw std::logic_error("independent DQN has no mixer");
}

void Learner::save(std::ostream& out) const {
  binio::write_tag(out, "LRNR", 1);
  binio::write<std::uint8_t>(out, static_cast<std::uint8_t>(config_.algorithm));
  binio::write<std::int32_t>(out, config_.n_agents);
  binio::write<std::int32_t>(out, config_.observation_size);
  binio::write_vector(out, config_.hidden);
  binio::write<std::int32_t>(out, config_.mixer_hidden);
  binio::write<double>(out, config_.gamma);
  binio::write(out, config_.adam);
  binio::write<std::int64_t>(out, config_.target_period);
  binio::write<std::uint64_t>(out, config_.seed);
  binio::write<std::int64_t>(out, updates_);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    agents_[i].net.save(out);
    agents_[i].optimizer.save(out);
    targets_[i].save(out);
  }
  if (mixer_) {
    for (const auto* m : {&*mixer_, &*target_mixer_})
      for (const auto& n : m->nets()) {
        n.net.save(out);
        n.optimizer.save(out);
      }
  }
}

Learner Learner::load(std::istream& in) {
  binio::expect_tag(in, "LRNR", 1);
  LearnerConfig cfg;
  const auto algo = binio::read<std::uint8_t>(in);
  if (algo > 2) throw binio::FormatError("unknown algorithm in checkpoint");
  cfg.algorithm = static_cast<Algorithm>(algo);
  cfg.n_agents = binio::read<std::int32_t>(in);
  cfg.observation_size = binio::read<std::int32_t>(in);
  cfg.hidden = binio::read_vector<int>(in);
  cfg.mixer_hidden = binio::read<std::int32_t>(in);
  cfg.gamma = binio::read<double>(in);
  cfg.adam = binio::read<nn::AdamOptions>(in);
  cfg.target_period = binio::read<std::int64_t>(in);
  cfg.seed = binio::read<std::uint64_t>(in);
  Learner learner(cfg);
  learner.updates_ = binio::read<std::int64_t>(in);
  for (std::size_t i = 0; i < learner.agents_.size(); ++i) {
    learner.agents_[i].net = nn::DenseNet::load(in);
    learner.agents_[i].optimizer = nn::Adam::load(in);
    learner.targets_[i] = nn::DenseNet::load(in);
  }
  if (learner.mixer_) {
    for (auto* m : {&*learner.mixer_, &*learner.target_mixer_})
      for (auto& n : m->nets()) {
        n.net = nn::DenseNet::load(in);
        n.optimizer = nn::Adam::load(in);
      }
  }
  return learner;
}

}  // namespace specshape
