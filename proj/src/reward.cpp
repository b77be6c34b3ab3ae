#include "specshape/reward.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace specshape {

using nlohmann::json;

PotentialWeights PotentialWeights::scaled(double c) const {
  return {alpha * c, beta * c, delta * c, zeta * c, eta * c, theta * c, iota * c};
}

void PotentialWeights::validate() const {
  for (double v : {alpha, beta, delta, zeta, eta, theta, iota})
    if (!(v >= 0.0) || !std::isfinite(v)) throw RewardError("potential weights must be finite and >= 0");
}

double potential(const CounterSnapshot& c, const PotentialWeights& w) {
  return w.alpha * static_cast<double>(c.items_completed) +
         w.beta * static_cast<double>(c.tasks_finished) -
         w.delta * static_cast<double>(c.step_count) -
         w.zeta * static_cast<double>(c.machines_used) -
         w.eta * static_cast<double>(c.path_violations) -
         w.theta * static_cast<double>(c.agent_collisions) -
         w.iota * static_cast<double>(c.emergency_violations);
}

double shaped_reward(const CounterSnapshot& prev, const CounterSnapshot& next,
                     const PotentialWeights& w, const ShapingConfig& cfg, bool next_is_absorbing) {
  if (!prev.precedes(next)) throw RewardError("counters decreased between transitions");
  const double next_phi = (cfg.episodic_absorbing && next_is_absorbing) ? 0.0 : potential(next, w);
  return cfg.gamma_shape * next_phi - potential(prev, w);
}

const PotentialWeights& RewardScheme::final_weights() const {
  return schedule.empty() ? initial : schedule.back().weights;
}

void RewardScheme::validate() const {
  initial.validate();
  int last = 0;
  for (const auto& entry : schedule) {
    entry.weights.validate();
    if (entry.episode <= last)
      throw RewardError("schedule episodes must be positive and strictly increasing");
    last = entry.episode;
  }
}

ActiveWeights active_weights(const RewardScheme& scheme, int episode) {
  ActiveWeights out{scheme.initial, false};
  for (const auto& entry : scheme.schedule) {
    if (entry.episode > episode) break;
    out.weights = entry.weights;
    out.reset_required = scheme.reset_on_change && entry.episode == episode;
  }
  return out;
}

namespace {

PotentialWeights functional_weights() {
  PotentialWeights w;
  w.beta = 1.0;
  w.delta = 0.1;
  return w;
}

}  // namespace

RewardScheme static_scheme(std::string_view name) {
  PotentialWeights w = functional_weights();
  if (name == "r0") {
    w = PotentialWeights{};
    w.alpha = 5.0;
    w.delta = 0.1;
  } else if (name == "r1") {
  } else if (name == "r2") {
    w.zeta = 0.2;
  } else if (name == "r3") {
    w.eta = 0.1;
  } else if (name == "r4") {
    w.theta = 0.4;
  } else if (name == "r5") {
    w.zeta = 0.2;
    w.eta = 0.1;
    w.theta = 0.4;
    w.iota = 1.0;
  } else {
    throw RewardError("unknown reward scheme '" + std::string(name) + "'");
  }
  return RewardScheme{std::string(name), w, {}, false};
}

RewardScheme scheduled_scheme(std::span<const int> boundaries, std::string name) {
  if (boundaries.empty() || boundaries.size() > 3)
    throw RewardError("scheduled scheme needs one to three boundaries");
  PotentialWeights w = functional_weights();
  w.eta = 0.1;
  RewardScheme scheme{std::move(name), w, {}, true};

  // Components added at each boundary, in order zeta, theta, iota.
  std::vector<std::vector<int>> groups;
  switch (boundaries.size()) {
    case 1: groups = {{0, 1, 2}}; break;
    case 2: groups = {{0, 1}, {2}}; break;
    default: groups = {{0}, {1}, {2}}; break;
  }
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    for (int component : groups[k]) {
      if (component == 0) w.zeta = 0.2;
      if (component == 1) w.theta = 0.4;
      if (component == 2) w.iota = 1.0;
    }
    scheme.schedule.push_back({boundaries[k], w});
  }
  scheme.validate();
  return scheme;
}

std::map<std::string, RewardScheme> scheme_table(std::span<const int> rx_boundaries) {
  std::map<std::string, RewardScheme> table;
  for (const char* name : {"r0", "r1", "r2", "r3", "r4", "r5"}) table.emplace(name, static_scheme(name));
  table.emplace("rx", scheduled_scheme(rx_boundaries));
  return table;
}

std::map<std::string, RewardScheme> scheme_table() {
  constexpr int kDefault[] = {2000, 3000};
  return scheme_table(kDefault);
}

namespace {

PotentialWeights weights_from_json(const json& j) {
  PotentialWeights w;
  for (const auto& [key, value] : j.items()) {
    const double v = value.get<double>();
    if (key == "alpha") w.alpha = v;
    else if (key == "beta") w.beta = v;
    else if (key == "delta") w.delta = v;
    else if (key == "zeta") w.zeta = v;
    else if (key == "eta") w.eta = v;
    else if (key == "theta") w.theta = v;
    else if (key == "iota") w.iota = v;
    else throw RewardError("unknown weight '" + key + "'");
  }
  return w;
}

json weights_to_json(const PotentialWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta},   {"delta", w.delta}, {"zeta", w.zeta},
          {"eta", w.eta},     {"theta", w.theta}, {"iota", w.iota}};
}

}  // namespace

RewardScheme scheme_from_json(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    RewardScheme s;
    s.name = doc.at("name").get<std::string>();
    s.initial = weights_from_json(doc.at("initial"));
    if (doc.contains("schedule"))
      for (const auto& e : doc["schedule"])
        s.schedule.push_back({e.at("episode").get<int>(), weights_from_json(e.at("weights"))});
    s.reset_on_change = doc.value("reset_on_change", !s.schedule.empty());
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw RewardError(std::string("malformed scheme document: ") + e.what());
  }
}

std::string scheme_to_json(const RewardScheme& s) {
  json doc;
  doc["name"] = s.name;
  doc["initial"] = weights_to_json(s.initial);
  json sched = json::array();
  for (const auto& e : s.schedule) sched.push_back({{"episode", e.episode}, {"weights", weights_to_json(e.weights)}});
  doc["schedule"] = std::move(sched);
  doc["reset_on_change"] = s.reset_on_change;
  return doc.dump();
}

}  // namespace specshape
