#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "specshape/experiment.hpp"

namespace py = pybind11;
using namespace specshape;

namespace {

py::dict counters_dict(const CounterSnapshot& c) {
  py::dict d;
  d["items_completed"] = c.items_completed;
  d["tasks_finished"] = c.tasks_finished;
  d["step_count"] = c.step_count;
  d["machines_used"] = c.machines_used;
  d["path_violations"] = c.path_violations;
  d["agent_collisions"] = c.agent_collisions;
  d["emergency_violations"] = c.emergency_violations;
  return d;
}

CounterSnapshot counters_from(const py::dict& d) {
  CounterSnapshot c;
  auto get = [&](const char* k) { return d.contains(k) ? d[k].cast<std::int64_t>() : 0; };
  c.items_completed = get("items_completed");
  c.tasks_finished = get("tasks_finished");
  c.step_count = get("step_count");
  c.machines_used = get("machines_used");
  c.path_violations = get("path_violations");
  c.agent_collisions = get("agent_collisions");
  c.emergency_violations = get("emergency_violations");
  return c;
}

py::dict weights_dict(const PotentialWeights& w) {
  py::dict d;
  d["alpha"] = w.alpha;
  d["beta"] = w.beta;
  d["delta"] = w.delta;
  d["zeta"] = w.zeta;
  d["eta"] = w.eta;
  d["theta"] = w.theta;
  d["iota"] = w.iota;
  return d;
}

py::dict record_dict(const EpisodeRecord& r) {
  py::dict d;
  d["episode"] = r.episode;
  d["steps_until_solved"] = r.steps_until_solved;
  d["solved"] = r.solved;
  d["soft_violations"] = r.soft_violations;
  d["hard_violations"] = r.hard_violations;
  d["wrong_machine_uses"] = r.wrong_machine_uses;
  d["counters"] = counters_dict(r.totals);
  d["epsilon_start"] = r.epsilon_start;
  d["reset_applied"] = r.reset_applied;
  d["mean_loss"] = r.mean_loss;
  return d;
}

JointAction joint_action(const std::vector<std::optional<int>>& actions) {
  JointAction out;
  for (const auto& a : actions) {
    if (a && (*a < 0 || *a >= kActionCount)) throw py::value_error("action index out of range");
    out.push_back(a ? std::optional<Action>(static_cast<Action>(*a)) : std::nullopt);
  }
  return out;
}

std::shared_ptr<const FactoryLayout> layout_or_default(const std::optional<FactoryLayout>& layout) {
  return std::make_shared<const FactoryLayout>(layout ? *layout : FactoryLayout::default_layout());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Factory Markov game, reward shaping and value-based multi-agent learners";

  py::register_exception<LayoutError>(m, "LayoutError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EnvError>(m, "EnvError", PyExc_RuntimeError);
  py::register_exception<RewardError>(m, "RewardError", PyExc_ValueError);

  m.attr("ACTIONS") = py::make_tuple("left", "right", "up", "down", "enqueue", "noop");

  py::class_<FactoryLayout>(m, "Layout")
      .def_static("default", &FactoryLayout::default_layout)
      .def_static("parse", &FactoryLayout::parse, py::arg("text"))
      .def_static("load", &FactoryLayout::load, py::arg("path"))
      .def("to_json", &FactoryLayout::to_json)
      .def_property_readonly("width", &FactoryLayout::width)
      .def_property_readonly("height", &FactoryLayout::height)
      .def_property_readonly("cell_count", &FactoryLayout::cell_count)
      .def_property_readonly("entry", &FactoryLayout::entry)
      .def_property_readonly("exit", &FactoryLayout::exit)
      .def_property_readonly("num_machine_types", &FactoryLayout::num_machine_types)
      .def("machine_type", [](const FactoryLayout& l, int c) { return l.cell(c).machine_type; }, py::arg("cell"));

  py::class_<FactoryEnv>(m, "Env")
      .def(py::init([](std::optional<FactoryLayout> layout, int n_agents, int tasks_per_bucket, int n_buckets,
                       int step_limit, bool emergency) {
             EnvConfig c;
             c.n_agents = n_agents;
             c.tasks_per_bucket = tasks_per_bucket;
             c.n_buckets = n_buckets;
             c.step_limit = step_limit;
             c.emergency.enabled = emergency;
             return FactoryEnv(layout_or_default(layout), c);
           }),
           py::arg("layout") = py::none(), py::arg("n_agents") = 4, py::arg("tasks_per_bucket") = 2,
           py::arg("n_buckets") = 2, py::arg("step_limit") = 50, py::arg("emergency") = false)
      .def("reset", &FactoryEnv::reset, py::arg("seed"))
      .def(
          "step",
          [](FactoryEnv& env, const std::vector<std::optional<int>>& actions) {
            const StepResult r = env.step(joint_action(actions));
            py::dict d;
            d["done"] = r.done;
            d["solved"] = r.solved;
            py::list deltas;
            for (const auto& c : r.deltas) deltas.append(counters_dict(c));
            d["deltas"] = deltas;
            return d;
          },
          py::arg("actions"), "One action index (or None) per agent.")
      .def("observe",
           [](const FactoryEnv& env, int agent) {
             const auto v = env.observe(agent);
             py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
             std::copy(v.begin(), v.end(), out.mutable_data());
             return out;
           },
           py::arg("agent"))
      .def("can_act", &FactoryEnv::can_act, py::arg("agent"))
      .def_property_readonly("episode_over", &FactoryEnv::episode_over)
      .def_property_readonly("observation_size", &FactoryEnv::observation_size)
      .def_property_readonly("step_index", [](const FactoryEnv& e) { return e.state().step; })
      .def_property_readonly("emergency_active", [](const FactoryEnv& e) { return e.state().emergency_active; })
      .def("agent",
           [](const FactoryEnv& e, int i) {
             const auto& a = e.state().agents.at(static_cast<std::size_t>(i));
             py::dict d;
             d["cell"] = a.cell;
             d["tasks"] = a.tasks.buckets();
             d["enqueued"] = a.enqueued;
             d["done"] = a.done;
             d["counters"] = counters_dict(a.counters);
             d["wrong_machine_uses"] = a.wrong_machine_uses;
             return d;
           },
           py::arg("index"))
      .def("render_text", &FactoryEnv::render_text)
      .def("render_svg", &FactoryEnv::render_svg);

  m.def("scheme_names", [] {
    std::vector<std::string> out;
    for (const auto& [name, s] : scheme_table()) out.push_back(name);
    return out;
  });
  m.def(
      "scheme_weights",
      [](const std::string& name, int episode, std::vector<int> rx_boundaries) {
        const RewardScheme s = name == "rx" ? scheduled_scheme(rx_boundaries) : static_scheme(name);
        return weights_dict(active_weights(s, episode).weights);
      },
      py::arg("name"), py::arg("episode") = 0, py::arg("rx_boundaries") = std::vector<int>{2000, 3000});
  m.def(
      "potential",
      [](const py::dict& counters, const std::string& scheme) {
        return specshape::potential(counters_from(counters), static_scheme(scheme).initial);
      },
      py::arg("counters"), py::arg("scheme"));

  m.def(
      "train",
      [](const std::string& algorithm, const std::string& scheme, int agents, int episodes, std::uint64_t seed,
         std::int64_t target_period) {
        ScenarioConfig cfg = scenario_preset(1);
        cfg.n_agents = agents;
        cfg.episodes = episodes;
        cfg.target_period = target_period;
        cfg.base_seed = seed;
        cfg.validate();
        Trainer trainer(make_trainer_config(cfg, parse_algorithm(algorithm), scheme, 0));
        {
          py::gil_scoped_release release;
          trainer.train();
        }
        py::list out;
        for (const auto& r : trainer.records()) out.append(record_dict(r));
        return out;
      },
      py::arg("algorithm") = "dqn", py::arg("scheme") = "r1", py::arg("agents") = 2, py::arg("episodes") = 10,
      py::arg("seed") = 0, py::arg("target_period") = 4000,
      "Trains one run and returns its per-episode records.");

  m.def(
      "run_config",
      [](const std::string& config_json, const std::string& out_dir, int jobs) {
        const ScenarioConfig cfg = parse_config(config_json);
        RunOptions opt;
        opt.out_dir = out_dir;
        opt.jobs = jobs;
        std::vector<RunResult> results;
        {
          py::gil_scoped_release release;
          results = run_scenario(cfg, opt);
        }
        return curves_to_csv(aggregate(results));
      },
      py::arg("config_json"), py::arg("out_dir") = "", py::arg("jobs") = 0,
      "Runs a scenario config document and returns the aggregated curves CSV.");

  m.def("plot_svg",
        [](const std::string& csv, const std::string& metric) { return plot_svg(parse_csv(csv), parse_metric(metric)); },
        py::arg("curves_csv"), py::arg("metric") = "steps");
}
