#include "specshape/replay.hpp"

#include <algorithm>
#include <cmath>

#include "binio.hpp"

namespace specshape {

ReplayBuffer::ReplayBuffer(ReplayConfig config) : config_(config) {
  if (config_.capacity == 0) throw ReplayError("replay capacity must be positive");
  if (config_.alpha < 0.0) throw ReplayError("priority exponent must be >= 0");
  while (leaf_base_ < config_.capacity) leaf_base_ <<= 1;
  tree_.assign(2 * leaf_base_, 0.0);
  priorities_.assign(config_.capacity, 0.0);
  entries_.reserve(std::min<std::size_t>(config_.capacity, 1 << 16));
}

void ReplayBuffer::set_leaf(std::size_t index, double value) {
  std::size_t node = leaf_base_ + index;
  tree_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

void ReplayBuffer::store(Transition t) {
  if (entries_.size() < config_.capacity) {
    entries_.push_back(std::move(t));
  } else {
    entries_[next_] = std::move(t);
  }
  priorities_[next_] = max_priority_;
  set_leaf(next_, std::pow(max_priority_, config_.alpha));
  next_ = (next_ + 1) % config_.capacity;
  size_ = std::min(size_ + 1, config_.capacity);
}

const Transition& ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw ReplayError("replay index out of range");
  return entries_[index];
}

double ReplayBuffer::sample_probability(std::size_t index) const {
  if (index >= size_) throw ReplayError("replay index out of range");
  return total() > 0.0 ? tree_[leaf_base_ + index] / total() : 0.0;
}

ReplayBuffer::Sample ReplayBuffer::sample(std::size_t batch, double beta, std::mt19937_64& rng) const {
  if (size_ == 0) throw ReplayError("cannot sample from an empty replay buffer");
  if (size_ < batch) throw ReplayError("replay buffer holds fewer entries than the batch size");
  if (!(total() > 0.0)) throw ReplayError("all replay priorities are zero");

  Sample s;
  s.indices.reserve(batch);
  s.weights.reserve(batch);
  std::uniform_real_distribution<double> u(0.0, total());
  for (std::size_t k = 0; k < batch; ++k) {
    double mass = u(rng);
    std::size_t node = 1;
    while (node < leaf_base_) {
      const double left = tree_[2 * node];
      if (mass < left || tree_[2 * node + 1] <= 0.0) {
        node = 2 * node;
      } else {
        mass -= left;
        node = 2 * node + 1;
      }
    }
    std::size_t index = node - leaf_base_;
    if (index >= size_ || tree_[node] <= 0.0) {
      // Rounding at the right edge; fall back to the last positive leaf.
      index = size_ - 1;
      while (index > 0 && tree_[leaf_base_ + index] <= 0.0) --index;
    }
    s.indices.push_back(index);
  }

  const double n = static_cast<double>(size_);
  double max_w = 0.0;
  for (std::size_t index : s.indices) {
    const double w = std::pow(n * sample_probability(index), -beta);
    s.weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (double& w : s.weights) w /= max_w;
  return s;
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) throw ReplayError("indices and errors differ in length");
  for (std::size_t k = 0; k < indices.size(); ++k)
    set_priority(indices[k], std::abs(td_errors[k]) + config_.priority_epsilon);
}

void ReplayBuffer::set_priority(std::size_t index, double priority) {
  if (index >= size_) throw ReplayError("replay index out of range");
  if (!(priority >= 0.0) || !std::isfinite(priority)) throw ReplayError("priority must be finite and >= 0");
  priorities_[index] = priority;
  max_priority_ = std::max(max_priority_, priority);
  set_leaf(index, std::pow(priority, config_.alpha));
}

void ReplayBuffer::save(std::ostream& out) const {
  binio::write_tag(out, "RPLY", 1);
  binio::write<std::uint64_t>(out, config_.capacity);
  binio::write<double>(out, config_.alpha);
  binio::write<double>(out, config_.priority_epsilon);
  binio::write<std::uint64_t>(out, size_);
  binio::write<std::uint64_t>(out, next_);
  binio::write<double>(out, max_priority_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto& t = entries_[i];
    binio::write_vector(out, t.observations);
    binio::write_vector(out, t.next_observations);
    binio::write_vector(out, t.actions);
    binio::write_vector(out, t.rewards);
    binio::write<double>(out, t.team_reward);
    binio::write_vector(out, t.active);
    binio::write_vector(out, t.agent_terminal);
    binio::write_vector(out, t.next_noop_only);
    binio::write<std::uint8_t>(out, t.terminal ? 1 : 0);
    binio::write<float>(out, t.step_fraction);
    binio::write<float>(out, t.next_step_fraction);
    binio::write<double>(out, priorities_[i]);
  }
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  binio::expect_tag(in, "RPLY", 1);
  ReplayConfig cfg;
  cfg.capacity = binio::read<std::uint64_t>(in);
  cfg.alpha = binio::read<double>(in);
  cfg.priority_epsilon = binio::read<double>(in);
  ReplayBuffer buf(cfg);
  const auto size = binio::read<std::uint64_t>(in);
  const auto next = binio::read<std::uint64_t>(in);
  const double max_priority = binio::read<double>(in);
  if (size > cfg.capacity || next >= cfg.capacity) throw binio::FormatError("replay header corrupt");
  for (std::size_t i = 0; i < size; ++i) {
    Transition t;
    t.observations = binio::read_vector<float>(in);
    t.next_observations = binio::read_vector<float>(in);
    t.actions = binio::read_vector<std::int8_t>(in);
    t.rewards = binio::read_vector<double>(in);
    t.team_reward = binio::read<double>(in);
    t.active = binio::read_vector<std::uint8_t>(in);
    t.agent_terminal = binio::read_vector<std::uint8_t>(in);
    t.next_noop_only = binio::read_vector<std::uint8_t>(in);
    t.terminal = binio::read<std::uint8_t>(in) != 0;
    t.step_fraction = binio::read<float>(in);
    t.next_step_fraction = binio::read<float>(in);
    const double p = binio::read<double>(in);
    buf.entries_.push_back(std::move(t));
    buf.priorities_[i] = p;
    buf.tree_[buf.leaf_base_ + i] = std::pow(p, cfg.alpha);
  }
  for (std::size_t node = buf.leaf_base_; node-- > 1;)
    buf.tree_[node] = buf.tree_[2 * node] + buf.tree_[2 * node + 1];
  buf.size_ = size;
  buf.next_ = next;
  buf.max_priority_ = max_priority;
  return buf;
}

}  // namespace specshape
