// Python bindings. Laws cross the boundary as lists of probabilities and
// results come back as dicts or numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lysim/config.hpp"
#include "lysim/errors.hpp"
#include "lysim/estimators.hpp"
#include "lysim/experiment.hpp"
#include "lysim/oracle.hpp"
#include "lysim/simulator.hpp"

namespace py = pybind11;
using namespace lysim;

namespace {

ModelParams make_params(const std::vector<double>& p, const std::vector<double>& gamma,
                        double lambda) {
  return ModelParams(OffspringLaw(p), OffspringLaw(gamma), lambda);
}

std::vector<double> to_vector(const OffspringLaw& law) {
  return {law.probs().begin(), law.probs().end()};
}

EstimatorKnobs make_knobs(double horizon, std::uint64_t threshold, std::size_t n,
                          std::uint64_t seed, std::uint64_t pop_cap, unsigned workers) {
  EstimatorKnobs k;
  k.horizon = horizon;
  k.threshold = threshold;
  k.n = n;
  k.seed = seed;
  k.pop_cap = pop_cap;
  k.sensitivity_subsample = 0;
  k.parallel.workers = workers;
  k.parallel.deterministic = true;
  return k;
}

py::dict summary_dict(const EstimateSummary& s) {
  py::dict d;
  d["estimate"] = s.point;
  d["ci_low"] = s.ci_low;
  d["ci_high"] = s.ci_high;
  d["n"] = s.n_replicates;
  d["censored_fraction"] = s.censored_fraction;
  d["std_error"] = s.std_error;
  return d;
}

py::dict derive(const std::vector<double>& p, const std::vector<double>& gamma, double lambda) {
  const auto params = make_params(p, gamma, lambda);
  const auto d = derive_params(params);
  const auto regime = classify_regime(d, params.gamma());
  py::dict out;
  out["alpha"] = d.alpha;
  out["beta"] = d.beta;
  out["beta_prime"] = d.beta_prime;
  out["q"] = to_vector(d.q);
  out["regime"] = regime_label(regime);
  out["coexistence_possible"] = regime.coexistence_possible;
  out["eta_verdict"] = std::string(to_string(regime.eta_verdict));
  out["y_survival_case"] = std::string(to_string(classify_y_survival(d)));
  return out;
}

py::dict x_prime(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
                 double r) {
  const auto xp = derive_x_prime_law(make_params(p, gamma, lambda), r);
  py::dict out;
  out["intensity"] = xp.intensity;
  out["law"] = to_vector(xp.law);
  out["alpha_prime"] = xp.alpha_prime;
  return out;
}

py::dict simulate(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
                  std::uint64_t x0, std::uint64_t y0, double horizon, std::uint64_t pop_cap,
                  std::uint64_t seed, bool record_events) {
  const auto params = make_params(p, gamma, lambda);
  StopRule stop;
  stop.horizon = horizon;
  stop.pop_cap = pop_cap;
  RunOptions options;
  options.record_events = record_events;
  Trajectory traj;
  {
    py::gil_scoped_release release;
    traj = run(SimState{x0, y0, 0.0}, params, stop, seed, options);
  }
  py::dict out;
  out["x"] = traj.terminal.x;
  out["y"] = traj.terminal.y;
  out["t"] = traj.terminal.t;
  out["stop_reason"] = std::string(to_string(traj.stop_reason));
  out["n_events"] = traj.n_events;
  out["x_zero_time"] = traj.x_zero_time;
  out["y_zero_time"] = traj.y_zero_time;
  if (record_events) {
    py::list events;
    SimState s = traj.initial;
    for (const auto& ev : traj.events) {
      s = apply(s, ev);
      events.append(py::make_tuple(ev.time, std::string(to_string(ev.kind)), ev.k, s.x, s.y));
    }
    out["events"] = events;
  }
  return out;
}

py::dict zeta(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
              std::uint64_t x0, std::uint64_t y0, double horizon, std::uint64_t threshold,
              std::size_t n, std::uint64_t seed, std::uint64_t pop_cap, unsigned workers) {
  const auto params = make_params(p, gamma, lambda);
  const auto knobs = make_knobs(horizon, threshold, n, seed, pop_cap, workers);
  ZetaReport r;
  {
    py::gil_scoped_release release;
    r = estimate_zeta(params, SimState{x0, y0, 0.0}, knobs);
  }
  auto out = summary_dict(r.summary);
  out["coexist"] = r.counts.coexist;
  out["x_extinct_first"] = r.counts.x_first;
  out["y_extinct_first"] = r.counts.y_first;
  out["ambiguous"] = r.counts.ambiguous;
  return out;
}

py::dict eta(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
             std::uint64_t x0, std::uint64_t y0, double horizon, std::uint64_t threshold,
             std::size_t n, std::uint64_t seed, std::uint64_t pop_cap, unsigned workers) {
  const auto params = make_params(p, gamma, lambda);
  const auto knobs = make_knobs(horizon, threshold, n, seed, pop_cap, workers);
  EtaReport r;
  {
    py::gil_scoped_release release;
    r = estimate_eta(params, SimState{x0, y0, 0.0}, knobs);
  }
  auto out = summary_dict(r.summary);
  out["extinct"] = r.counts.extinct;
  out["survived"] = r.counts.survived;
  out["ambiguous"] = r.counts.ambiguous;
  out["extinct_while_x_alive"] = r.counts.extinct_while_x_alive;
  return out;
}

py::dict t_union(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
                 std::uint64_t x0, std::uint64_t y0, double horizon, std::size_t n,
                 std::uint64_t seed, std::uint64_t pop_cap, unsigned workers, double t_min,
                 std::optional<double> t_max) {
  const auto params = make_params(p, gamma, lambda);
  const auto knobs = make_knobs(horizon, 100, n, seed, pop_cap, workers);
  TailWindow window;
  window.t_min = t_min;
  window.t_max = t_max;
  TUnionReport r;
  {
    py::gil_scoped_release release;
    r = estimate_t_union(params, SimState{x0, y0, 0.0}, knobs, window);
  }
  auto out = summary_dict(r.summary);
  py::array_t<double> times(static_cast<py::ssize_t>(r.curve.size()));
  py::array_t<double> survival(static_cast<py::ssize_t>(r.curve.size()));
  auto tv = times.mutable_unchecked<1>();
  auto sv = survival.mutable_unchecked<1>();
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    tv(static_cast<py::ssize_t>(i)) = r.curve[i].t;
    sv(static_cast<py::ssize_t>(i)) = r.curve[i].survival;
  }
  out["times"] = times;
  out["survival"] = survival;
  auto fit = [](const std::optional<TailFit>& f) -> py::object {
    if (!f) return py::none();
    py::dict d;
    d["t_min"] = f->t_min;
    d["t_max"] = f->t_max;
    d["rate"] = f->rate;
    d["r_squared"] = f->fit.r_squared;
    return d;
  };
  out["exponential"] = fit(r.exponential);
  out["power_law"] = fit(r.power_law);
  return out;
}

py::tuple transient(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
                    std::uint64_t x_max, std::uint64_t y_max, std::uint64_t x0, std::uint64_t y0,
                    double t) {
  const CappedGrid grid{x_max, y_max};
  std::vector<double> dist;
  {
    py::gil_scoped_release release;
    dist = transient_distribution(build_generator(make_params(p, gamma, lambda), grid), x0, y0, t);
  }
  py::array_t<double> box({static_cast<py::ssize_t>(x_max + 1), static_cast<py::ssize_t>(y_max + 1)});
  auto b = box.mutable_unchecked<2>();
  for (std::uint64_t x = 0; x <= x_max; ++x) {
    for (std::uint64_t y = 0; y <= y_max; ++y) {
      b(static_cast<py::ssize_t>(x), static_cast<py::ssize_t>(y)) = dist[grid.index(x, y)];
    }
  }
  return py::make_tuple(box, dist[grid.escaped_index()]);
}

py::dict absorption(const std::vector<double>& p, const std::vector<double>& gamma, double lambda,
                    std::uint64_t x_max, std::uint64_t y_max, std::uint64_t x0, std::uint64_t y0) {
  const auto a = absorption_probabilities(
      build_generator(make_params(p, gamma, lambda), CappedGrid{x_max, y_max}), x0, y0);
  py::dict out;
  out["x_boundary"] = a.p_x_boundary;
  out["y_boundary"] = a.p_y_boundary;
  out["escaped"] = a.p_escaped;
  return out;
}

py::dict run_config(const std::string& text, const std::string& output_dir) {
  const auto parsed = parse_config_text(text);
  if (!parsed.ok()) {
    std::ostringstream msg;
    for (const auto& issue : parsed.issues) msg << issue.describe() << "\n";
    throw py::value_error(msg.str());
  }
  auto cfg = *parsed.config;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  ExperimentReport report;
  {
    py::gil_scoped_release release;
    report = run_experiment(cfg);
  }
  py::dict out;
  out["output_dir"] = report.output_dir.string();
  out["config_hash"] = report.config_hash;
  out["points"] = report.points;
  py::list files;
  for (const auto& f : report.files) files.append(f.string());
  out["files"] = files;
  py::list failures;
  for (const auto& f : report.failures) {
    failures.append(py::make_tuple(f.index, f.param_hash, f.stage, f.message));
  }
  out["failures"] = failures;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Healthy/infected interacting branching process: simulator, oracle, estimators";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<InvalidLaw>(m, "InvalidLaw", PyExc_ValueError);
  py::register_exception<InvalidParams>(m, "InvalidParams", PyExc_ValueError);

  m.def("stream_seed", &stream_seed, py::arg("master"), py::arg("index"));
  m.def("derive", &derive, py::arg("p"), py::arg("gamma"), py::arg("lam"));
  m.def("x_prime_law", &x_prime, py::arg("p"), py::arg("gamma"), py::arg("lam"), py::arg("r"));
  m.def("extinction_fixed_point",
        [](const std::vector<double>& law) { return extinction_fixed_point(OffspringLaw(law)); },
        py::arg("law"));

  m.def("simulate", &simulate, py::arg("p"), py::arg("gamma"), py::arg("lam"), py::arg("x0"),
        py::arg("y0"), py::arg("horizon"), py::arg("pop_cap") = 10'000'000,
        py::arg("seed") = 0, py::arg("record_events") = false);

  m.def("estimate_zeta", &zeta, py::arg("p"), py::arg("gamma"), py::arg("lam"), py::arg("x0"),
        py::arg("y0"), py::arg("horizon"), py::arg("threshold") = 100, py::arg("n") = 1000,
        py::arg("seed") = 0, py::arg("pop_cap") = 100'000, py::arg("workers") = 0);
  m.def("estimate_eta", &eta, py::arg("p"), py::arg("gamma"), py::arg("lam"), py::arg("x0"),
        py::arg("y0"), py::arg("horizon"), py::arg("threshold") = 100, py::arg("n") = 1000,
        py::arg("seed") = 0, py::arg("pop_cap") = 100'000, py::arg("workers") = 0);
  m.def("estimate_t_union", &t_union, py::arg("p"), py::arg("gamma"), py::arg("lam"),
        py::arg("x0"), py::arg("y0"), py::arg("horizon"), py::arg("n") = 1000,
        py::arg("seed") = 0, py::arg("pop_cap") = 100'000, py::arg("workers") = 0,
        py::arg("t_min") = 1.0, py::arg("t_max") = py::none());

  m.def("transient_distribution", &transient, py::arg("p"), py::arg("gamma"), py::arg("lam"),
        py::arg("x_max"), py::arg("y_max"), py::arg("x0"), py::arg("y0"), py::arg("t"),
        "Law of the capped chain at time t as an (x_max+1, y_max+1) array plus escaped mass.");
  m.def("absorption_probabilities", &absorption, py::arg("p"), py::arg("gamma"), py::arg("lam"),
        py::arg("x_max"), py::arg("y_max"), py::arg("x0"), py::arg("y0"));

  m.def("run_config", &run_config, py::arg("text"), py::arg("output_dir") = "",
        "Run a YAML experiment given as text; raises ValueError listing every config problem.");
}
