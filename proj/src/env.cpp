#include "specshape/env.hpp"

#include <algorithm>
#include <numeric>

namespace specshape {

const char* action_name(Action a) {
  switch (a) {
    case Action::left: return "left";
    case Action::right: return "right";
    case Action::up: return "up";
    case Action::down: return "down";
    case Action::enqueue: return "enqueue";
    case Action::noop: return "noop";
  }
  return "?";
}

CounterSnapshot& CounterSnapshot::operator+=(const CounterSnapshot& o) {
  items_completed += o.items_completed;
  tasks_finished += o.tasks_finished;
  step_count += o.step_count;
  machines_used += o.machines_used;
  path_violations += o.path_violations;
  agent_collisions += o.agent_collisions;
  emergency_violations += o.emergency_violations;
  return *this;
}

CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b) {
  return {a.items_completed - b.items_completed,   a.tasks_finished - b.tasks_finished,
          a.step_count - b.step_count,             a.machines_used - b.machines_used,
          a.path_violations - b.path_violations,   a.agent_collisions - b.agent_collisions,
          a.emergency_violations - b.emergency_violations};
}

bool CounterSnapshot::precedes(const CounterSnapshot& n) const {
  return items_completed <= n.items_completed && tasks_finished <= n.tasks_finished &&
         step_count <= n.step_count && machines_used <= n.machines_used &&
         path_violations <= n.path_violations && agent_collisions <= n.agent_collisions &&
         emergency_violations <= n.emergency_violations;
}

CounterSnapshot sum_counters(std::span<const CounterSnapshot> parts) {
  CounterSnapshot total;
  for (const auto& p : parts) total += p;
  return total;
}

TaskBuckets::TaskBuckets(std::vector<std::vector<int>> buckets) : buckets_(std::move(buckets)) {
  std::erase_if(buckets_, [](const auto& b) { return b.empty(); });
}

std::size_t TaskBuckets::task_count() const {
  std::size_t n = 0;
  for (const auto& b : buckets_) n += b.size();
  return n;
}

std::span<const int> TaskBuckets::current() const {
  if (buckets_.empty()) return {};
  return buckets_.front();
}

std::span<const int> TaskBuckets::next() const {
  if (buckets_.size() < 2) return {};
  return buckets_[1];
}

bool TaskBuckets::process(int task) {
  if (buckets_.empty()) return false;
  auto& front = buckets_.front();
  auto it = std::find(front.begin(), front.end(), task);
  if (it == front.end()) return false;
  front.erase(it);
  if (front.empty()) buckets_.erase(buckets_.begin());
  return true;
}

int EnvState::occupancy(int cell) const {
  int n = 0;
  for (const auto& a : agents)
    if (!a.done && a.cell == cell) ++n;
  return n;
}

bool EnvState::all_done() const {
  return std::all_of(agents.begin(), agents.end(), [](const AgentState& a) { return a.done; });
}

FactoryEnv::FactoryEnv(std::shared_ptr<const FactoryLayout> layout, EnvConfig config)
    : layout_(std::move(layout)), config_(config) {
  if (!layout_) throw EnvError("null layout");
  if (config_.n_agents < 1 || config_.tasks_per_bucket < 1 || config_.n_buckets < 1 ||
      config_.step_limit < 1)
    throw EnvError("agent, task, bucket and step counts must be >= 1");
  if (config_.n_agents > layout_->capacity(layout_->entry(), config_.n_agents))
    throw EnvError("n_agents exceeds entry capacity");
  const auto& em = config_.emergency;
  if (em.activation_prob < 0.0 || em.activation_prob > 1.0 || em.min_duration < 1 ||
      em.max_duration < em.min_duration)
    throw EnvError("invalid emergency process parameters");
  reset(0);
}

void FactoryEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = EnvState{};
  state_.queues.assign(static_cast<std::size_t>(layout_->cell_count()), {});
  std::uniform_int_distribution<int> task_dist(0, layout_->num_machine_types() - 1);
  for (int i = 0; i < config_.n_agents; ++i) {
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(config_.n_buckets));
    for (auto& b : buckets)
      for (int k = 0; k < config_.tasks_per_bucket; ++k) b.push_back(task_dist(rng_));
    AgentState a;
    a.id = i;
    a.cell = layout_->entry();
    a.tasks = TaskBuckets(std::move(buckets));
    a.assigned_tasks = a.tasks.task_count();
    state_.agents.push_back(std::move(a));
  }
}

void FactoryEnv::set_state(EnvState state) {
  if (static_cast<int>(state.agents.size()) != config_.n_agents)
    throw EnvError("state agent count does not match config");
  if (state.queues.size() != static_cast<std::size_t>(layout_->cell_count())) {
    state.queues.assign(static_cast<std::size_t>(layout_->cell_count()), {});
    for (const auto& a : state.agents)
      if (a.enqueued && !a.done) state.queues[static_cast<std::size_t>(a.cell)].push_back(a.id);
  }
  for (const auto& a : state.agents)
    if (a.enqueued && !layout_->cell(a.cell).machine_type)
      throw EnvError("enqueued agent on a cell without machine");
  state_ = std::move(state);
}

bool FactoryEnv::can_act(int agent) const {
  const auto& a = state_.agents.at(static_cast<std::size_t>(agent));
  return !a.done && !a.enqueued;
}

bool FactoryEnv::episode_over() const {
  return state_.all_done() || state_.step >= config_.step_limit;
}

void FactoryEnv::validate_actions(const JointAction& actions) const {
  if (actions.size() != state_.agents.size()) throw EnvError("one action slot per agent required");
  if (episode_over()) throw EnvError("step called on a finished episode");
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const bool acting = can_act(static_cast<int>(i));
    if (acting && !actions[i]) throw EnvError("missing action for agent " + std::to_string(i));
    if (!acting && actions[i])
      throw EnvError("action submitted for done or enqueued agent " + std::to_string(i));
  }
}

StepResult FactoryEnv::step(const JointAction& actions) {
  validate_actions(actions);
  const std::size_t n = state_.agents.size();
  std::vector<CounterSnapshot> before(n);
  std::vector<std::int64_t> wrong_before(n);
  for (std::size_t i = 0; i < n; ++i) {
    before[i] = state_.agents[i].counters;
    wrong_before[i] = state_.agents[i].wrong_machine_uses;
  }

  std::vector<std::size_t> acting;
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = state_.agents[i];
    if (a.done) continue;
    a.counters.step_count += 1;
    if (actions[i]) {
      acting.push_back(i);
      if (state_.emergency_active && *actions[i] != Action::noop)
        a.counters.emergency_violations += 1;
    }
  }

  // Every machine serves the head of its queue; all queued agents were
  // enqueued during an earlier step.
  for (std::size_t c = 0; c < state_.queues.size(); ++c) {
    auto& queue = state_.queues[c];
    if (queue.empty()) continue;
    auto& a = state_.agents[static_cast<std::size_t>(queue.front())];
    queue.pop_front();
    const int type = *layout_->cell(static_cast<int>(c)).machine_type;
    a.counters.machines_used += 1;
    if (a.tasks.process(type)) {
      a.counters.tasks_finished += 1;
      if (a.tasks.empty() && a.counters.items_completed == 0) a.counters.items_completed = 1;
    } else {
      a.wrong_machine_uses += 1;
    }
    a.enqueued = false;
  }

  std::vector<int> occupancy(static_cast<std::size_t>(layout_->cell_count()), 0);
  for (const auto& a : state_.agents)
    if (!a.done) ++occupancy[static_cast<std::size_t>(a.cell)];

  std::shuffle(acting.begin(), acting.end(), rng_);
  for (std::size_t i : acting) {
    auto& a = state_.agents[i];
    const Action act = *actions[i];
    if (act == Action::noop) continue;
    if (act == Action::enqueue) {
      // Enqueueing where no machine stands has no effect.
      if (layout_->cell(a.cell).machine_type) {
        a.enqueued = true;
        state_.queues[static_cast<std::size_t>(a.cell)].push_back(a.id);
      }
      continue;
    }
    const auto target = layout_->grid_neighbor(a.cell, static_cast<Direction>(static_cast<int>(act)));
    if (!target || !layout_->has_edge(a.cell, *target)) {
      a.counters.path_violations += 1;
      continue;
    }
    const auto t = static_cast<std::size_t>(*target);
    if (occupancy[t] >= layout_->capacity(*target, config_.n_agents)) {
      a.counters.agent_collisions += 1;
      continue;
    }
    --occupancy[static_cast<std::size_t>(a.cell)];
    ++occupancy[t];
    a.cell = *target;
  }

  for (auto& a : state_.agents)
    if (!a.done && !a.enqueued && a.tasks.empty() && a.cell == layout_->exit()) a.done = true;

  state_.step += 1;
  update_emergency();

  StepResult result;
  result.deltas.resize(n);
  result.wrong_machine_deltas.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.deltas[i] = state_.agents[i].counters - before[i];
    result.wrong_machine_deltas[i] = state_.agents[i].wrong_machine_uses - wrong_before[i];
  }
  result.solved = state_.all_done();
  result.done = result.solved || state_.step >= config_.step_limit;
  return result;
}

void FactoryEnv::update_emergency() {
  const auto& em = config_.emergency;
  if (!em.enabled) return;
  if (state_.emergency_active) {
    if (--state_.emergency_remaining <= 0) {
      state_.emergency_active = false;
      state_.emergency_remaining = 0;
    }
    return;
  }
  std::bernoulli_distribution activate(em.activation_prob);
  if (activate(rng_)) {
    std::uniform_int_distribution<int> duration(em.min_duration, em.max_duration);
    state_.emergency_active = true;
    state_.emergency_remaining = duration(rng_);
  }
}

std::size_t observation_size(const FactoryLayout& layout) {
  return static_cast<std::size_t>(layout.cell_count()) + 2 +
         2 * static_cast<std::size_t>(layout.num_machine_types()) + 5;
}

std::size_t FactoryEnv::observation_size() const { return specshape::observation_size(*layout_); }

// Layout: [one-hot cell | enqueued | emergency | current bucket | next bucket |
//          occupancy/capacity of own cell, left, right, up, down].
std::vector<double> FactoryEnv::observe(int agent) const {
  const auto& a = state_.agents.at(static_cast<std::size_t>(agent));
  const auto cells = static_cast<std::size_t>(layout_->cell_count());
  const auto types = static_cast<std::size_t>(layout_->num_machine_types());
  std::vector<double> obs(observation_size(), 0.0);
  obs[static_cast<std::size_t>(a.cell)] = 1.0;
  obs[cells] = a.enqueued ? 1.0 : 0.0;
  obs[cells + 1] = state_.emergency_active ? 1.0 : 0.0;
  for (int t : a.tasks.current()) obs[cells + 2 + static_cast<std::size_t>(t)] = 1.0;
  for (int t : a.tasks.next()) obs[cells + 2 + types + static_cast<std::size_t>(t)] = 1.0;

  const std::size_t occ = cells + 2 + 2 * types;
  auto fraction = [&](int cell) {
    return static_cast<double>(state_.occupancy(cell)) /
           static_cast<double>(layout_->capacity(cell, config_.n_agents));
  };
  obs[occ] = fraction(a.cell);
  for (std::size_t d = 0; d < kDirections.size(); ++d) {
    if (auto nb = layout_->grid_neighbor(a.cell, kDirections[d])) obs[occ + 1 + d] = fraction(*nb);
  }
  return obs;
}

}  // namespace specshape
