// Command-line front end: derive, simulate, estimate, sweep, validate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lysim/config.hpp"
#include "lysim/couplings.hpp"
#include "lysim/errors.hpp"
#include "lysim/experiment.hpp"
#include "lysim/trajectory_io.hpp"

namespace {

using namespace lysim;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

OffspringLaw parse_law(const std::string& text, const std::string& name) {
  std::vector<double> probs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      probs.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidLaw(name + ": cannot read '" + item + "' as a probability");
    }
  }
  try {
    return OffspringLaw(std::move(probs));
  } catch (const InvalidLaw& e) {
    throw InvalidLaw(name + ": " + e.what());
  }
}

struct ParamFlags {
  std::string p;
  std::string gamma;
  double lambda = 0.0;

  void add_to(CLI::App* app) {
    app->add_option("--p", p, "healthy offspring law, probabilities of 0,1,2,... comma separated")
        ->required();
    app->add_option("--gamma", gamma, "conversion law Gamma, comma separated")->required();
    app->add_option("--lambda", lambda, "extra lysis rate")->check(CLI::NonNegativeNumber);
  }
  ModelParams build() const {
    return ModelParams(parse_law(p, "--p"), parse_law(gamma, "--gamma"), lambda);
  }
};

struct ExperimentFlags {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool deterministic = false;
  bool print_config = false;

  void add_to(CLI::App* app) {
    app->add_option("config", config, "experiment file (YAML)")->required()->check(
        CLI::ExistingFile);
    app->add_option("-o,--output", output, "output directory (overrides the file and "
                                           "LYSIM_OUTPUT_DIR)");
    app->add_option("--seed", seed, "master seed override");
    app->add_option("-j,--workers", workers, "worker threads, 0 for all cores");
    app->add_flag("--deterministic", deterministic, "ordered reduction over fixed batches");
    app->add_flag("--print-config", print_config, "print the config with defaults and exit");
  }
};

int run_experiment_command(const ExperimentFlags& flags, bool single_cell) {
  auto parsed = parse_config(flags.config);
  if (!parsed.ok()) {
    std::cerr << flags.config << ": " << parsed.issues.size() << " error(s)\n";
    for (const auto& issue : parsed.issues) std::cerr << "  " << issue.describe() << '\n';
    return kExitConfig;
  }
  auto cfg = std::move(*parsed.config);
  if (!flags.output.empty()) cfg.output_dir = flags.output;
  if (flags.seed) cfg.knobs.seed = *flags.seed;
  if (flags.workers) cfg.knobs.parallel.workers = *flags.workers;
  if (flags.deterministic) cfg.knobs.parallel.deterministic = true;
  if (flags.print_config) {
    std::cout << dump_config(cfg);
    return 0;
  }
  if (single_cell && cfg.grid_size() != 1) {
    std::cerr << "estimate takes a single parameter set; this file describes " << cfg.grid_size()
              << " cells, use sweep\n";
    return kExitConfig;
  }
  const auto report = run_experiment(cfg, &std::cerr);
  std::cout << "wrote " << report.files.size() << " file(s) to " << report.output_dir.string()
            << " (config " << report.config_hash << ")\n";
  for (const auto& f : report.failures) {
    std::cerr << "FAILED cell " << f.index << " [" << f.param_hash << "] " << f.stage << ": "
              << f.message << '\n';
  }
  if (!report.ok()) {
    std::cerr << report.failures.size() << " of the cell stages failed; the rest completed\n";
    return kExitFailure;
  }
  return 0;
}

void print_derive(const ModelParams& params, std::optional<double> r) {
  const auto d = derive_params(params);
  const auto regime = classify_regime(d, params.gamma());
  std::cout << "alpha       " << format_double(d.alpha) << '\n'
            << "beta        " << format_double(d.beta) << '\n'
            << "beta_prime  " << format_double(d.beta_prime) << '\n'
            << "p_bar       " << format_double(d.p_bar) << '\n'
            << "gamma_bar   " << format_double(d.gamma_bar) << '\n'
            << "q_bar       " << format_double(d.q_bar) << '\n'
            << "q           ";
  for (std::size_t k = 0; k < d.q.probs().size(); ++k) {
    std::cout << (k ? "," : "") << format_double(d.q.probs()[k]);
  }
  std::cout << '\n'
            << "regime      " << regime_label(regime) << '\n'
            << "eta         " << to_string(regime.eta_verdict) << '\n'
            << "y_survival  " << to_string(classify_y_survival(d)) << '\n'
            << "param_hash  " << param_hash(params) << '\n';
  if (r) {
    const auto xp = derive_x_prime_law(params, *r);
    std::cout << "x_prime_intensity  " << format_double(xp.intensity) << '\n'
              << "x_prime_alpha      " << format_double(xp.alpha_prime) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Healthy/infected branching process simulator and Monte Carlo toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* derive = app.add_subcommand("derive", "print alpha, beta, beta', q and the regime");
  ParamFlags derive_params_flags;
  derive_params_flags.add_to(derive);
  std::optional<double> derive_r;
  derive->add_option("--r", derive_r, "also print the thinned X' law for this r > 0");

  auto* simulate = app.add_subcommand("simulate", "dump one trajectory as JSONL");
  ParamFlags sim_params;
  sim_params.add_to(simulate);
  std::uint64_t sim_x0 = 1, sim_y0 = 1, sim_seed = 0, sim_cap = 100'000;
  double sim_horizon = 30.0, sim_r = 1.0;
  std::string sim_out, sim_coupling = "none";
  simulate->add_option("--x0", sim_x0, "initial healthy cells");
  simulate->add_option("--y0", sim_y0, "initial infected cells");
  simulate->add_option("--horizon", sim_horizon)->check(CLI::PositiveNumber);
  simulate->add_option("--pop-cap", sim_cap, "stop once the population exceeds this");
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--coupling", sim_coupling, "none, dominating or thinned")
      ->check(CLI::IsMember({"none", "dominating", "thinned"}));
  simulate->add_option("--r", sim_r, "thinning factor for --coupling thinned")
      ->check(CLI::PositiveNumber);
  simulate->add_option("-o,--output", sim_out, "JSONL file (default stdout)");

  auto* estimate = app.add_subcommand("estimate", "Monte Carlo estimates for one parameter set");
  ExperimentFlags estimate_flags;
  estimate_flags.add_to(estimate);

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo estimates over a parameter grid");
  ExperimentFlags sweep_flags;
  sweep_flags.add_to(sweep);

  auto* validate = app.add_subcommand("validate", "oracle and invariant checks");
  std::uint64_t validate_seed = 20240601;
  unsigned validate_workers = 0;
  bool validate_deterministic = false;
  validate->add_option("--seed", validate_seed);
  validate->add_option("-j,--workers", validate_workers);
  validate->add_flag("--deterministic", validate_deterministic);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; any other usage error counts as invalid input.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*derive) {
      print_derive(derive_params_flags.build(), derive_r);
      return 0;
    }
    if (*simulate) {
      const auto params = sim_params.build();
      StopRule stop;
      stop.horizon = sim_horizon;
      stop.pop_cap = sim_cap;
      std::ofstream file;
      if (!sim_out.empty()) {
        const auto parent = std::filesystem::path(sim_out).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        file.open(sim_out, std::ios::binary | std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + sim_out);
      }
      std::ostream& out = sim_out.empty() ? std::cout : file;
      if (sim_coupling == "dominating") {
        CoupledRunOptions options;
        options.record_events = true;
        const auto traj = run_coupled(CoupledStateA{sim_x0, sim_x0, sim_y0, sim_y0, 0.0}, params,
                                      stop, sim_seed, options);
        write_jsonl(out, traj);
      } else if (sim_coupling == "thinned") {
        CoupledRunOptions options;
        options.record_events = true;
        const auto traj = run_coupled(CoupledStateB{sim_x0, sim_x0, sim_x0, sim_y0, 0.0, sim_r},
                                      params, stop, sim_seed, options);
        write_jsonl(out, traj);
      } else {
        RunOptions options;
        options.record_events = true;
        const auto traj = run(SimState{sim_x0, sim_y0, 0.0}, params, stop, sim_seed, options);
        write_jsonl(out, traj);
        std::cerr << "stopped: " << to_string(traj.stop_reason) << " at t="
                  << format_double(traj.terminal.t) << " x=" << traj.terminal.x
                  << " y=" << traj.terminal.y << " events=" << traj.n_events << '\n';
      }
      return 0;
    }
    if (*estimate) return run_experiment_command(estimate_flags, true);
    if (*sweep) return run_experiment_command(sweep_flags, false);
    if (*validate) {
      ParallelOptions parallel;
      parallel.workers = validate_workers;
      parallel.deterministic = validate_deterministic;
      return run_validation_suite(std::cout, validate_seed, parallel) ? 0 : kExitFailure;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
