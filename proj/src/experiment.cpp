#include "lysim/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lysim/couplings.hpp"
#include "lysim/errors.hpp"
#include "lysim/trajectory_io.hpp"

namespace lysim {
namespace {

namespace fs = std::filesystem;

std::string law_text(const OffspringLaw& law) {
  std::string s;
  for (std::size_t k = 0; k < law.probs().size(); ++k) {
    if (k) s += ';';
    s += format_double(law.probs()[k]);
  }
  return s;
}

struct CellContext {
  std::string param_hash;
  DerivedParams derived;
  std::string regime;
  std::uint64_t seed = 0;
};

class CsvFile {
 public:
  explicit CsvFile(std::string header) { text_ << header << '\n'; }

  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((text_ << (first ? "" : ",") << field(fields), first = false), ...);
    text_ << '\n';
  }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text_.str();
  }

 private:
  static std::string field(double v) { return format_double(v); }
  static std::string field(std::uint64_t v) { return std::to_string(v); }
  static std::string field(const std::string& v) { return v; }
  static std::string field(std::string_view v) { return std::string(v); }
  static std::string field(const char* v) { return v; }

  std::ostringstream text_;
};

void estimate_row(CsvFile& csv, const CellContext& cell, const EstimateSummary& s,
                  const ExperimentConfig& cfg, const std::string& cfg_hash) {
  csv.row(cell.param_hash, cell.derived.alpha, cell.derived.beta, cell.derived.beta_prime,
          cell.regime, s.point, s.ci_low, s.ci_high, static_cast<std::uint64_t>(s.n_replicates),
          s.censored_fraction, cfg.knobs.horizon, cfg.knobs.threshold, cell.seed, cfg_hash);
}

void sensitivity_row(CsvFile& csv, const CellContext& cell, std::string_view estimator,
                     const EstimateSummary& s) {
  if (!s.sensitivity) return;
  const auto& c = *s.sensitivity;
  csv.row(cell.param_hash, estimator, c.horizon, c.point, c.ci.low, c.ci.high,
          static_cast<std::uint64_t>(c.n), s.point, cell.seed);
}

void tail_row(CsvFile& csv, const CellContext& cell, std::string_view kind,
              const std::optional<TailFit>& fit) {
  if (!fit) return;
  csv.row(cell.param_hash, kind, fit->t_min, fit->t_max, fit->rate, fit->fit.r_squared,
          static_cast<std::uint64_t>(fit->fit.points), cell.seed);
}

struct Histogram {
  std::vector<std::uint64_t> counts;
  void merge(const Histogram& o) {
    if (counts.size() < o.counts.size()) counts.resize(o.counts.size(), 0);
    for (std::size_t i = 0; i < o.counts.size(); ++i) counts[i] += o.counts[i];
  }
};

OffspringLaw random_law(Rng& rng, std::size_t max_support) {
  const std::size_t size = 1 + static_cast<std::size_t>(rng.uniform() * max_support);
  std::vector<double> w(size);
  double total = 0.0;
  for (auto& v : w) total += (v = rng.uniform());
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < size; ++i) head += (w[i] /= total);
  w.back() = std::max(0.0, 1.0 - head);
  return OffspringLaw(std::move(w));
}

ModelParams random_params(Rng& rng) {
  for (;;) {
    auto p = random_law(rng, 6);
    if (p[1] == 1.0) continue;
    return ModelParams(std::move(p), random_law(rng, 6), 3.0 * rng.uniform());
  }
}

void report_line(std::ostream& out, bool pass, const std::string& name, const std::string& detail) {
  out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t index) {
  return stream_seed(master_seed, index);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  ExperimentReport report;
  report.output_dir = resolve_output_dir(cfg.output_dir);
  report.config_hash = config_hash(cfg);
  fs::create_directories(report.output_dir);

  CsvFile derived_csv(
      "param_hash,p,gamma,lambda,alpha,beta,beta_prime,regime,y_survival_case,config_hash");
  std::vector<std::pair<EstimatorKind, CsvFile>> estimate_csvs;
  for (const auto kind : cfg.estimators) estimate_csvs.emplace_back(kind, CsvFile(kEstimateColumns));
  CsvFile sensitivity_csv(
      "param_hash,estimator,horizon,estimate,ci_low,ci_high,n,base_estimate,seed");
  CsvFile tail_csv("param_hash,fit,t_min,t_max,rate,r_squared,points,seed");
  bool any_sensitivity = false;
  bool any_tail = false;

  const auto grid = cfg.grid();
  report.points = grid.size();
  for (const auto& point : grid) {
    CellContext cell;
    cell.param_hash = param_hash(point.params);
    cell.seed = cfg.cell_seed.value_or(cell_seed(cfg.knobs.seed, point.index));
    try {
      cell.derived = derive_params(point.params);
      cell.regime = regime_label(classify_regime(cell.derived, point.params.gamma()));
    } catch (const std::exception& e) {
      report.failures.push_back({point.index, cell.param_hash, "derive", e.what()});
      continue;
    }
    derived_csv.row(cell.param_hash, law_text(point.params.p()), law_text(point.params.gamma()),
                    point.params.lambda(), cell.derived.alpha, cell.derived.beta,
                    cell.derived.beta_prime, cell.regime,
                    to_string(classify_y_survival(cell.derived)), report.config_hash);
    if (log) {
      *log << "cell " << point.index + 1 << "/" << grid.size() << " " << cell.param_hash
           << " lambda=" << format_double(point.params.lambda()) << " " << cell.regime << '\n';
    }

    EstimatorKnobs knobs = cfg.knobs;
    knobs.seed = cell.seed;
    for (auto& [kind, csv] : estimate_csvs) {
      try {
        switch (kind) {
          case EstimatorKind::Zeta: {
            const auto r = estimate_zeta(point.params, cfg.initial, knobs);
            estimate_row(csv, cell, r.summary, cfg, report.config_hash);
            sensitivity_row(sensitivity_csv, cell, "zeta", r.summary);
            any_sensitivity |= r.summary.sensitivity.has_value();
            break;
          }
          case EstimatorKind::Eta: {
            const auto r = estimate_eta(point.params, cfg.initial, knobs);
            estimate_row(csv, cell, r.summary, cfg, report.config_hash);
            sensitivity_row(sensitivity_csv, cell, "eta", r.summary);
            any_sensitivity |= r.summary.sensitivity.has_value();
            break;
          }
          case EstimatorKind::TUnion: {
            const auto r = estimate_t_union(point.params, cfg.initial, knobs, cfg.tail);
            estimate_row(csv, cell, r.summary, cfg, report.config_hash);
            tail_row(tail_csv, cell, "exponential", r.exponential);
            tail_row(tail_csv, cell, "power_law", r.power_law);
            any_tail = true;
            break;
          }
        }
      } catch (const std::exception& e) {
        report.failures.push_back({point.index, cell.param_hash, std::string(to_string(kind)),
                                   e.what()});
        if (log) *log << "  " << to_string(kind) << " failed: " << e.what() << '\n';
      }
    }

    if (cfg.trajectory_dumps > 0) {
      try {
        const fs::path dir = report.output_dir / "trajectories";
        fs::create_directories(dir);
        const Simulator sim(point.params);
        StopRule stop;
        stop.horizon = cfg.knobs.horizon;
        stop.pop_cap = cfg.knobs.pop_cap;
        RunOptions options;
        options.record_events = true;
        for (std::size_t j = 0; j < cfg.trajectory_dumps; ++j) {
          const auto traj = sim.run(cfg.initial, stop, stream_seed(cell.seed, j), options);
          const fs::path file = dir / ("cell" + std::to_string(point.index) + "_run" +
                                       std::to_string(j) + ".jsonl");
          std::ofstream out(file, std::ios::binary | std::ios::trunc);
          write_jsonl(out, traj);
          report.files.push_back(file);
        }
      } catch (const std::exception& e) {
        report.failures.push_back({point.index, cell.param_hash, "trajectory", e.what()});
      }
    }
  }

  auto emit = [&](const CsvFile& csv, const std::string& name) {
    const fs::path path = report.output_dir / name;
    csv.write(path);
    report.files.push_back(path);
  };
  emit(derived_csv, "derived.csv");
  for (const auto& [kind, csv] : estimate_csvs) emit(csv, std::string(to_string(kind)) + ".csv");
  if (any_sensitivity) emit(sensitivity_csv, "sensitivity.csv");
  if (any_tail) emit(tail_csv, "tail_fits.csv");

  nlohmann::ordered_json manifest;
  manifest["software"] = "lysim";
  manifest["version"] = std::string(kVersion);
  manifest["schema_version"] = cfg.schema_version;
  manifest["master_seed"] = cfg.knobs.seed;
  manifest["config_hash"] = report.config_hash;
  manifest["deterministic"] = cfg.knobs.parallel.deterministic;
  manifest["grid_points"] = report.points;
  manifest["failures"] = nlohmann::json::array();
  for (const auto& f : report.failures) {
    manifest["failures"].push_back(
        {{"index", f.index}, {"param_hash", f.param_hash}, {"stage", f.stage},
         {"error", f.message}});
  }
  manifest["files"] = nlohmann::json::array();
  for (const auto& f : report.files) {
    manifest["files"].push_back(fs::relative(f, report.output_dir).generic_string());
  }
  manifest["config"] = dump_config(cfg);
  const fs::path manifest_path = report.output_dir / "manifest.json";
  std::ofstream(manifest_path, std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  report.files.push_back(manifest_path);
  return report;
}

std::vector<double> capped_empirical_distribution(const ModelParams& params,
                                                  const CappedGrid& grid, std::uint64_t x0,
                                                  std::uint64_t y0, double t, std::size_t n,
                                                  std::uint64_t seed,
                                                  const ParallelOptions& parallel) {
  grid.validate();
  const Simulator sim(params);
  StopRule stop;
  stop.horizon = t;
  stop.pop_cap = grid.x_max + grid.y_max + 1;
  stop.x_cap = grid.x_max;
  stop.y_cap = grid.y_max;
  const auto tally = run_replicates<Histogram>(n, parallel, [&](std::size_t i, Histogram& h) {
    if (h.counts.empty()) h.counts.assign(grid.state_count(), 0);
    const auto traj = sim.run(SimState{x0, y0, 0.0}, stop, stream_seed(seed, i));
    if (traj.stop_reason == StopReason::GridEscape || traj.stop_reason == StopReason::PopCap) {
      ++h.counts[grid.escaped_index()];
    } else {
      ++h.counts[grid.index(traj.terminal.x, traj.terminal.y)];
    }
  });
  std::vector<double> law(grid.state_count(), 0.0);
  for (std::size_t i = 0; i < tally.counts.size(); ++i) {
    law[i] = static_cast<double>(tally.counts[i]) / static_cast<double>(n);
  }
  return law;
}

double expected_sampling_tv(const std::vector<double>& law, std::size_t n) {
  const double nd = static_cast<double>(n);
  double total = 0.0;
  for (const double p : law) {
    if (p <= 0.0) continue;
    total += std::min(std::sqrt(2.0 * p * (1.0 - p) / (std::numbers::pi * nd)), 2.0 * p);
  }
  return 0.5 * total;
}

bool run_validation_suite(std::ostream& out, std::uint64_t seed, const ParallelOptions& parallel) {
  bool all = true;
  auto record = [&](bool pass, const std::string& name, const std::string& detail) {
    report_line(out, pass, name, detail);
    all = all && pass;
  };

  {
    Rng rng(stream_seed(seed, 0));
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto params = random_params(rng);
      worst = std::max(worst, std::abs(beta_from_q(params) - beta_from_identity(params)));
    }
    record(worst <= 1e-9, "beta_two_routes", "max |diff| = " + format_double(worst));
  }

  const ModelParams params(OffspringLaw({0.25, 0.0, 0.75}), OffspringLaw({0.5, 0.5}), 1.0);
  {
    const CappedGrid grid{20, 20};
    const std::size_t n = 200'000;
    const auto exact = transient_distribution(build_generator(params, grid), 3, 2, 1.0);
    const auto empirical =
        capped_empirical_distribution(params, grid, 3, 2, 1.0, n, stream_seed(seed, 1), parallel);
    const double tv = total_variation(exact, empirical);
    // Mean null TV plus a McDiarmid deviation at level 1e-6.
    const double limit =
        expected_sampling_tv(exact, n) + std::sqrt(std::log(1e6) / (2.0 * static_cast<double>(n)));
    record(tv <= limit, "oracle_total_variation",
           "tv = " + format_double(tv) + ", limit = " + format_double(limit));
  }
  {
    const double s = extinction_fixed_point(OffspringLaw({0.25, 0.0, 0.75}));
    record(std::abs(s - 1.0 / 3.0) <= 1e-10, "extinction_fixed_point",
           "s = " + format_double(s));
  }
  {
    StopRule stop;
    stop.horizon = 5.0;
    stop.pop_cap = 100'000;
    std::uint64_t violations = 0;
    std::uint64_t checks = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      try {
        const auto a = run_coupled(CoupledStateA{2, 3, 2, 2, 0.0}, params, stop,
                                   stream_seed(seed, 2 * i + 2));
        const auto b = run_coupled(CoupledStateB{3, 3, 3, 2, 0.0, 0.5}, params, stop,
                                   stream_seed(seed, 2 * i + 3));
        checks += a.invariant_checks + b.invariant_checks;
      } catch (const InvariantViolation&) {
        ++violations;
      }
    }
    record(violations == 0, "coupling_invariants",
           std::to_string(violations) + " violations in " + std::to_string(checks) + " checks");
  }
  {
    double worst = 0.0;
    const double r = 0.7;
    for (std::uint64_t x = 0; x <= 6; ++x) {
      for (std::uint64_t xp = 0; xp <= 6; ++xp) {
        for (std::uint64_t y = 0; y <= 6; ++y) {
          const CoupledStateB s{x, xp, std::max(x, xp) + 1, y, 0.0, r};
          const double expected =
              static_cast<double>(xp) *
              (params.p()[0] + r * params.lysis_rate() * (1.0 - params.gamma()[0]));
          worst = std::max(worst, std::abs(x_prime_death_rate(s, params) - expected));
        }
      }
    }
    record(worst <= 1e-12, "x_prime_death_rate", "max |diff| = " + format_double(worst));
  }
  return all;
}

}  // namespace lysim
