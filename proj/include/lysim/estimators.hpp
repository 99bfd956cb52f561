#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lysim/model.hpp"
#include "lysim/parallel.hpp"
#include "lysim/simulator.hpp"
#include "lysim/stats.hpp"

namespace lysim {

/// Knobs shared by the Monte Carlo estimators.
struct EstimatorKnobs {
  double horizon = 30.0;
  std::uint64_t threshold = 100;  // escape threshold of the censoring proxy
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  /// Replicates whose total population exceeds this stop early and are
  /// judged on the state reached, like a horizon stop.
  std::uint64_t pop_cap = 100'000;
  /// Replicates rerun at twice the horizon for the sensitivity report;
  /// 0 disables it.
  std::size_t sensitivity_subsample = 1000;
  ParallelOptions parallel;
};

enum class Verdict : std::uint8_t { CoexistCensored, XExtinctFirst, YExtinctFirst, BothAmbiguous };
std::string_view to_string(Verdict v);

/// Verdict of one run stopped at the first time x * y == 0. t_union is set
/// exactly when an extinction was observed.
struct ReplicateOutcome {
  Verdict verdict = Verdict::BothAmbiguous;
  std::optional<double> t_union;
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  double stop_time = 0.0;
  StopReason stop_reason = StopReason::Horizon;
};

/// Coexistence proxy: both counts >= threshold when the run is stopped by the
/// horizon or the population cap.
ReplicateOutcome classify_coexistence(const Trajectory& trajectory, std::uint64_t threshold);

struct SensitivityCheck {
  double horizon = 0.0;
  double point = 0.0;
  Interval ci;
  std::size_t n = 0;
};

struct EstimateSummary {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_replicates = 0;
  double censored_fraction = 0.0;
  double std_error = 0.0;
  std::optional<SensitivityCheck> sensitivity;
};

struct VerdictCounts {
  std::uint64_t coexist = 0;
  std::uint64_t x_first = 0;
  std::uint64_t y_first = 0;
  std::uint64_t ambiguous = 0;

  std::uint64_t total() const { return coexist + x_first + y_first + ambiguous; }
  void add(Verdict v);
  void merge(const VerdictCounts& o);
};

struct ZetaReport {
  EstimateSummary summary;
  VerdictCounts counts;
};

/// Coexistence probability proxy with a Wilson interval. Requires n >= 100.
ZetaReport estimate_zeta(const ModelParams& params, const SimState& initial,
                         const EstimatorKnobs& knobs);

enum class YOutcome : std::uint8_t { Extinct, Survived, Ambiguous };

struct EtaCounts {
  std::uint64_t extinct = 0;
  std::uint64_t survived = 0;
  std::uint64_t ambiguous = 0;
  /// Replicates where y hit zero while x was still positive.
  std::uint64_t extinct_while_x_alive = 0;

  std::uint64_t total() const { return extinct + survived + ambiguous; }
  void merge(const EtaCounts& o);
};

struct EtaReport {
  EstimateSummary summary;
  EtaCounts counts;
};

/// Extinction probability of the infected cells: y reaching 0 by the
/// horizon. Runs with y >= threshold at the stop count as survival; the rest
/// are ambiguous. Requires n >= 100.
EtaReport estimate_eta(const ModelParams& params, const SimState& initial,
                       const EstimatorKnobs& knobs);

struct TailFit {
  double t_min = 0.0;
  double t_max = 0.0;
  LinearFit fit;   // log S against t (exponential) or log t (power law)
  double rate = 0.0;  // -slope
};

struct TUnionReport {
  EstimateSummary summary;  // mean of observed T_union, t-interval
  std::vector<SurvivalPoint> curve;
  std::optional<TailFit> exponential;
  std::optional<TailFit> power_law;
  std::vector<TimeObservation> observations;
};

/// Tail window request; an unset t_max is chosen as the latest time with at
/// least min_at_risk replicates still at risk.
struct TailWindow {
  double t_min = 1.0;
  std::optional<double> t_max;
  std::size_t min_at_risk = 200;
  std::size_t points = 40;
};

/// Time to the first extinction of either population. pop_cap stops count as
/// censored at the stop time.
TUnionReport estimate_t_union(const ModelParams& params, const SimState& initial,
                              const EstimatorKnobs& knobs, const TailWindow& window = {});

/// Least-squares fit of log Kaplan-Meier survival on an evenly spaced grid
/// over [t_min, t_max] (log-spaced when `log_time`). Grid points with zero
/// survival are skipped.
std::optional<TailFit> fit_tail(const std::vector<TimeObservation>& observations,
                                double t_min, double t_max, std::size_t points, bool log_time);

struct GrowthReport {
  double mean_slope = 0.0;
  Interval ci;
  std::size_t survivors = 0;
  std::size_t runs = 0;
};

/// Per-run least-squares slope of log count on [t_start, t_end] over runs
/// still alive at t_end, averaged.
GrowthReport estimate_growth_rate(const BranchingProcess& process, std::uint64_t initial_count,
                                  double t_start, double t_end, std::size_t n,
                                  std::uint64_t seed, const ParallelOptions& parallel = {});

/// Same slope statistic for the x' component of the thinned coupling, with
/// per-event invariant checks on every run.
struct CouplingGrowthReport {
  GrowthReport growth;
  std::uint64_t invariant_checks = 0;
};
CouplingGrowthReport estimate_x_prime_growth(const ModelParams& params, double r,
                                             std::uint64_t x0, std::uint64_t y0,
                                             double t_start, double t_end, std::size_t n,
                                             std::uint64_t seed,
                                             const ParallelOptions& parallel = {});

struct MeanCheck {
  double mean = 0.0;
  double std_error = 0.0;
  double expected = 0.0;
  std::size_t n = 0;
  /// |mean - expected| / std_error
  double z() const;
};

/// Sample mean of an auxiliary variable against its closed-form expectation:
/// U: e^alpha, V: e^beta, W: e^(alpha + p0), Phi: E[Gamma] p0 (1 + lambda)
/// (e^beta - 1) / beta (the limit 1 + lambda at beta = 0), Xi: its success
/// probability.
MeanCheck aux_mean_check(AuxVariable which, const ModelParams& params, std::size_t n,
                         std::uint64_t seed, XiVariant xi_variant = XiVariant::LemmaStatement);
double aux_expected_mean(AuxVariable which, const ModelParams& params,
                         XiVariant xi_variant = XiVariant::LemmaStatement);

struct DoobReport {
  double delta = 0.0;
  double frequency = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;  // one-sided 95% Wilson lower bound
  double bound = 0.0;   // 1 / delta
  std::size_t n = 0;
  bool passed = false;  // ci_low <= bound
};

/// Frequency of sup_{t <= horizon} U(t) e^{-u t} >= delta for a supercritical
/// branching process started from one individual, u its Malthusian parameter.
/// All deltas share one pass; a run stops once the largest delta is reached.
std::vector<DoobReport> doob_supremum_check(const BranchingProcess& process,
                                            std::span<const double> deltas, double horizon,
                                            std::size_t n, std::uint64_t seed,
                                            const ParallelOptions& parallel = {});
DoobReport doob_supremum_check(const BranchingProcess& process, double delta, double horizon,
                               std::size_t n, std::uint64_t seed,
                               const ParallelOptions& parallel = {});

struct HarrisReport {
  std::size_t big_m = 0;
  std::size_t m = 0;
  std::size_t resamples = 0;
  double trimmed_variance = 0.0;
  double variance_x1 = 0.0;
  double bound = 0.0;           // M Var(X1)
  double relative_error = 0.0;  // sampling error of trimmed_variance, relative to bound
  bool passed = false;          // trimmed_variance <= bound (1 + 3 relative_error)
};

using Sampler = std::function<double(Rng&)>;

/// Variance of the trimmed sum of M draws (m largest removed) against M Var(X1).
/// Resample r draws from Rng(stream_seed(seed, r)).
HarrisReport harris_variance_check(const Sampler& sampler, std::size_t big_m, std::size_t m,
                                   std::size_t n_resamples, std::uint64_t seed);

struct HolderReport {
  double mean_top_sum = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  double p_norm = 0.0;
  bool passed = false;  // mean_top_sum <= bound
};

/// Mean of the top-m sum of M draws resampled with replacement from `pool`,
/// against the Holder bound evaluated with the pool's empirical p-norm.
HolderReport holder_top_m_check(std::span<const double> pool, std::size_t big_m, std::size_t m,
                                double p, std::size_t n_resamples, std::uint64_t seed);

/// Diagnostic constant 9 (Var W / E[W]^2 + Var xi / E[xi]^2) from n empirical
/// W draws and closed-form xi moments. Empty when xi never succeeds.
std::optional<double> lemma32_constant(const ModelParams& params, std::size_t n,
                                       std::uint64_t seed,
                                       XiVariant xi_variant = XiVariant::LemmaStatement);

struct EtaSweepPoint {
  double lambda = 0.0;
  DerivedParams derived;
  Regime regime;
  YSurvivalCase y_case = YSurvivalCase::NotApplicable;
  EtaReport eta;
};

/// eta at each lambda. Point i uses seed stream_seed(knobs.seed, i).
std::vector<EtaSweepPoint> sweep_eta_over_lambda(const OffspringLaw& p, const OffspringLaw& gamma,
                                                 std::span<const double> lambdas,
                                                 const SimState& initial,
                                                 const EstimatorKnobs& knobs);

/// Indices i with point[i] exceeding both neighbours by more than
/// `sigmas` combined standard errors.
std::vector<std::size_t> strict_local_maxima(const std::vector<EtaSweepPoint>& sweep,
                                             double sigmas = 3.0);

}  // namespace lysim
