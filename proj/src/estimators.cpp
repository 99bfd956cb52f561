#include "lysim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lysim/couplings.hpp"

namespace lysim {
namespace {

constexpr std::uint64_t kUncappedPopulation = 1ULL << 50;

void require_replicates(std::size_t n) {
  if (n < 100) throw std::invalid_argument("estimators need at least 100 replicates");
}

StopRule union_stop(const EstimatorKnobs& knobs, double horizon) {
  StopRule stop;
  stop.horizon = horizon;
  stop.pop_cap = knobs.pop_cap;
  stop.absorb_on_t_union = true;
  return stop;
}

EstimateSummary proportion_summary(std::uint64_t hits, std::uint64_t n, double censored) {
  EstimateSummary s;
  s.n_replicates = n;
  s.point = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  const Interval ci = wilson_interval(hits, n);
  s.ci_low = ci.low;
  s.ci_high = ci.high;
  s.std_error = n ? std::sqrt(s.point * (1.0 - s.point) / static_cast<double>(n)) : 0.0;
  s.censored_fraction = n ? censored / static_cast<double>(n) : 0.0;
  return s;
}

struct ZetaTally {
  VerdictCounts counts;
  void merge(const ZetaTally& o) { counts.merge(o.counts); }
};

VerdictCounts zeta_counts(const Simulator& sim, const SimState& initial, const StopRule& stop,
                          std::uint64_t threshold, std::size_t n, std::uint64_t seed,
                          const ParallelOptions& parallel) {
  auto tally = run_replicates<ZetaTally>(n, parallel, [&](std::size_t i, ZetaTally& t) {
    const auto traj = sim.run(initial, stop, stream_seed(seed, i));
    t.counts.add(classify_coexistence(traj, threshold).verdict);
  });
  return tally.counts;
}

double survival_at(const Trajectory& traj, std::uint64_t threshold) {
  return traj.terminal.y >= threshold ? 1.0 : 0.0;
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::CoexistCensored: return "coexist_censored";
    case Verdict::XExtinctFirst: return "x_extinct_first";
    case Verdict::YExtinctFirst: return "y_extinct_first";
    case Verdict::BothAmbiguous: return "both_ambiguous";
  }
  return "?";
}

void VerdictCounts::add(Verdict v) {
  switch (v) {
    case Verdict::CoexistCensored: ++coexist; break;
    case Verdict::XExtinctFirst: ++x_first; break;
    case Verdict::YExtinctFirst: ++y_first; break;
    case Verdict::BothAmbiguous: ++ambiguous; break;
  }
}

void VerdictCounts::merge(const VerdictCounts& o) {
  coexist += o.coexist;
  x_first += o.x_first;
  y_first += o.y_first;
  ambiguous += o.ambiguous;
}

void EtaCounts::merge(const EtaCounts& o) {
  extinct += o.extinct;
  survived += o.survived;
  ambiguous += o.ambiguous;
  extinct_while_x_alive += o.extinct_while_x_alive;
}

ReplicateOutcome classify_coexistence(const Trajectory& traj, std::uint64_t threshold) {
  ReplicateOutcome out;
  out.x = traj.terminal.x;
  out.y = traj.terminal.y;
  out.stop_time = traj.terminal.t;
  out.stop_reason = traj.stop_reason;
  if (traj.terminal.x == 0 || traj.terminal.y == 0) {
    // The first zero decides; x and y cannot vanish on the same event when
    // both start positive.
    const double tx = traj.x_zero_time.value_or(std::numeric_limits<double>::infinity());
    const double ty = traj.y_zero_time.value_or(std::numeric_limits<double>::infinity());
    out.verdict = tx <= ty ? Verdict::XExtinctFirst : Verdict::YExtinctFirst;
    out.t_union = std::min(tx, ty);
    return out;
  }
  out.verdict = (traj.terminal.x >= threshold && traj.terminal.y >= threshold)
                    ? Verdict::CoexistCensored
                    : Verdict::BothAmbiguous;
  return out;
}

ZetaReport estimate_zeta(const ModelParams& params, const SimState& initial,
                         const EstimatorKnobs& knobs) {
  require_replicates(knobs.n);
  const Simulator sim(params);
  ZetaReport report;
  report.counts = zeta_counts(sim, initial, union_stop(knobs, knobs.horizon), knobs.threshold,
                              knobs.n, knobs.seed, knobs.parallel);
  const double censored = static_cast<double>(report.counts.coexist + report.counts.ambiguous);
  report.summary = proportion_summary(report.counts.coexist, knobs.n, censored);

  if (knobs.sensitivity_subsample > 0) {
    const std::size_t sub = std::min(knobs.n, knobs.sensitivity_subsample);
    const auto counts = zeta_counts(sim, initial, union_stop(knobs, 2.0 * knobs.horizon),
                                    knobs.threshold, sub, knobs.seed, knobs.parallel);
    SensitivityCheck check;
    check.horizon = 2.0 * knobs.horizon;
    check.n = sub;
    check.point = static_cast<double>(counts.coexist) / static_cast<double>(sub);
    check.ci = wilson_interval(counts.coexist, sub);
    report.summary.sensitivity = check;
  }
  return report;
}

EtaReport estimate_eta(const ModelParams& params, const SimState& initial,
                       const EstimatorKnobs& knobs) {
  require_replicates(knobs.n);
  const Simulator sim(params);
  auto eta_counts = [&](double horizon, std::size_t n) {
    StopRule stop;
    stop.horizon = horizon;
    stop.pop_cap = knobs.pop_cap;
    stop.absorb_on_y_extinct = true;
    struct Tally {
      EtaCounts counts;
      void merge(const Tally& o) { counts.merge(o.counts); }
    };
    return run_replicates<Tally>(n, knobs.parallel, [&](std::size_t i, Tally& t) {
             const auto traj = sim.run(initial, stop, stream_seed(knobs.seed, i));
             if (traj.terminal.y == 0) {
               ++t.counts.extinct;
               if (traj.terminal.x > 0) ++t.counts.extinct_while_x_alive;
             } else if (survival_at(traj, knobs.threshold) > 0.0) {
               ++t.counts.survived;
             } else {
               ++t.counts.ambiguous;
             }
           })
        .counts;
  };

  EtaReport report;
  report.counts = eta_counts(knobs.horizon, knobs.n);
  const double censored = static_cast<double>(report.counts.survived + report.counts.ambiguous);
  report.summary = proportion_summary(report.counts.extinct, knobs.n, censored);
  if (knobs.sensitivity_subsample > 0) {
    const std::size_t sub = std::min(knobs.n, knobs.sensitivity_subsample);
    const auto counts = eta_counts(2.0 * knobs.horizon, sub);
    SensitivityCheck check;
    check.horizon = 2.0 * knobs.horizon;
    check.n = sub;
    check.point = static_cast<double>(counts.extinct) / static_cast<double>(sub);
    check.ci = wilson_interval(counts.extinct, sub);
    report.summary.sensitivity = check;
  }
  return report;
}

std::optional<TailFit> fit_tail(const std::vector<TimeObservation>& observations, double t_min,
                                double t_max, std::size_t points, bool log_time) {
  if (!(t_max > t_min) || points < 2) return std::nullopt;
  if (log_time && !(t_min > 0.0)) return std::nullopt;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(points - 1);
    grid[i] = log_time ? std::exp(std::log(t_min) + f * (std::log(t_max) - std::log(t_min)))
                       : t_min + f * (t_max - t_min);
  }
  const auto curve = kaplan_meier(observations, grid);
  std::vector<double> xs, ys;
  for (const auto& pt : curve) {
    if (pt.survival <= 0.0) continue;
    xs.push_back(log_time ? std::log(pt.t) : pt.t);
    ys.push_back(std::log(pt.survival));
  }
  if (xs.size() < 2) return std::nullopt;
  TailFit tail;
  tail.t_min = t_min;
  tail.t_max = t_max;
  tail.fit = least_squares(xs, ys);
  tail.rate = -tail.fit.slope;
  return tail;
}

TUnionReport estimate_t_union(const ModelParams& params, const SimState& initial,
                              const EstimatorKnobs& knobs, const TailWindow& window) {
  require_replicates(knobs.n);
  const Simulator sim(params);
  const StopRule stop = union_stop(knobs, knobs.horizon);

  struct Tally {
    std::vector<std::pair<std::size_t, TimeObservation>> obs;
    void merge(const Tally& o) { obs.insert(obs.end(), o.obs.begin(), o.obs.end()); }
  };
  auto tally = run_replicates<Tally>(knobs.n, knobs.parallel, [&](std::size_t i, Tally& t) {
    const auto traj = sim.run(initial, stop, stream_seed(knobs.seed, i));
    const auto outcome = classify_coexistence(traj, knobs.threshold);
    if (outcome.t_union) {
      t.obs.push_back({i, {*outcome.t_union, true}});
    } else {
      t.obs.push_back({i, {outcome.stop_time, false}});
    }
  });
  // Replicate order, so sums below do not depend on scheduling.
  std::sort(tally.obs.begin(), tally.obs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  TUnionReport report;
  Moments moments;
  std::size_t censored = 0;
  report.observations.reserve(tally.obs.size());
  for (const auto& [i, o] : tally.obs) {
    report.observations.push_back(o);
    if (o.observed) {
      moments.add(o.time);
    } else {
      ++censored;
    }
  }
  auto& s = report.summary;
  s.n_replicates = knobs.n;
  s.point = moments.mean();
  const Interval ci = t_interval(moments);
  s.ci_low = ci.low;
  s.ci_high = ci.high;
  s.std_error = moments.std_error();
  s.censored_fraction = static_cast<double>(censored) / static_cast<double>(knobs.n);

  const std::size_t curve_points = 200;
  std::vector<double> grid(curve_points);
  for (std::size_t i = 0; i < curve_points; ++i) {
    grid[i] = knobs.horizon * static_cast<double>(i + 1) / static_cast<double>(curve_points);
  }
  report.curve = kaplan_meier(report.observations, grid);

  double t_max = window.t_max.value_or(0.0);
  if (!window.t_max) {
    for (const auto& pt : report.curve) {
      if (pt.at_risk >= window.min_at_risk) t_max = pt.t;
    }
  }
  report.exponential = fit_tail(report.observations, window.t_min, t_max, window.points, false);
  report.power_law = fit_tail(report.observations, window.t_min, t_max, window.points, true);
  return report;
}

GrowthReport estimate_growth_rate(const BranchingProcess& process, std::uint64_t initial_count,
                                  double t_start, double t_end, std::size_t n,
                                  std::uint64_t seed, const ParallelOptions& parallel) {
  if (!(t_end > t_start) || t_start < 0.0) throw std::invalid_argument("bad growth window");
  constexpr std::size_t kPoints = 11;
  RunOptions options;
  for (std::size_t i = 0; i < kPoints; ++i) {
    options.checkpoints.push_back(t_start + (t_end - t_start) * static_cast<double>(i) /
                                                static_cast<double>(kPoints - 1));
  }
  StopRule stop;
  stop.horizon = t_end;
  stop.pop_cap = kUncappedPopulation;

  struct Tally {
    Moments slopes;
    void merge(const Tally& o) { slopes.merge(o.slopes); }
  };
  auto tally = run_replicates<Tally>(n, parallel, [&](std::size_t i, Tally& t) {
    const auto traj = process.run(initial_count, stop, stream_seed(seed, i), options);
    if (traj.checkpoints.size() != kPoints || traj.checkpoints.back().x == 0) return;
    std::vector<double> ts, logs;
    for (const auto& cp : traj.checkpoints) {
      if (cp.x == 0) return;
      ts.push_back(cp.t);
      logs.push_back(std::log(static_cast<double>(cp.x)));
    }
    t.slopes.add(least_squares(ts, logs).slope);
  });
  GrowthReport report;
  report.runs = n;
  report.survivors = tally.slopes.n;
  report.mean_slope = tally.slopes.mean();
  report.ci = t_interval(tally.slopes);
  return report;
}

CouplingGrowthReport estimate_x_prime_growth(const ModelParams& params, double r,
                                             std::uint64_t x0, std::uint64_t y0,
                                             double t_start, double t_end, std::size_t n,
                                             std::uint64_t seed, const ParallelOptions& parallel) {
  if (!(t_end > t_start) || t_start < 0.0) throw std::invalid_argument("bad growth window");
  constexpr std::size_t kPoints = 11;
  CoupledRunOptions options;
  options.assert_invariants = true;
  for (std::size_t i = 0; i < kPoints; ++i) {
    options.checkpoints.push_back(t_start + (t_end - t_start) * static_cast<double>(i) /
                                                static_cast<double>(kPoints - 1));
  }
  StopRule stop;
  stop.horizon = t_end;
  stop.pop_cap = kUncappedPopulation;
  const CoupledSimulatorB sim(params);
  const CoupledStateB initial{x0, x0, x0, y0, 0.0, r};

  struct Tally {
    Moments slopes;
    std::uint64_t checks = 0;
    void merge(const Tally& o) {
      slopes.merge(o.slopes);
      checks += o.checks;
    }
  };
  auto tally = run_replicates<Tally>(n, parallel, [&](std::size_t i, Tally& t) {
    const auto traj = sim.run(initial, stop, stream_seed(seed, i), options);
    t.checks += traj.invariant_checks;
    if (traj.checkpoints.size() != kPoints) return;
    std::vector<double> ts, logs;
    for (const auto& cp : traj.checkpoints) {
      if (cp.x_prime == 0) return;
      ts.push_back(cp.t);
      logs.push_back(std::log(static_cast<double>(cp.x_prime)));
    }
    t.slopes.add(least_squares(ts, logs).slope);
  });
  CouplingGrowthReport report;
  report.invariant_checks = tally.checks;
  report.growth.runs = n;
  report.growth.survivors = tally.slopes.n;
  report.growth.mean_slope = tally.slopes.mean();
  report.growth.ci = t_interval(tally.slopes);
  return report;
}

double MeanCheck::z() const {
  if (std_error <= 0.0) return mean == expected ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(mean - expected) / std_error;
}

double aux_expected_mean(AuxVariable which, const ModelParams& params, XiVariant xi_variant) {
  const DerivedParams d = derive_params(params);
  switch (which) {
    case AuxVariable::U: return std::exp(d.alpha);
    case AuxVariable::V: return std::exp(d.beta);
    case AuxVariable::W: return std::exp(d.alpha + params.p()[0]);
    case AuxVariable::Phi: {
      // Expected number of branching events of the infected process on [0, 1].
      const double intensity = 1.0 + params.lambda();
      const double events =
          std::abs(d.beta) < 1e-12 ? intensity : intensity * std::expm1(d.beta) / d.beta;
      return d.gamma_bar * params.p()[0] * events;
    }
    case AuxVariable::Xi: return xi_success_probability(params, xi_variant);
  }
  return 0.0;
}

MeanCheck aux_mean_check(AuxVariable which, const ModelParams& params, std::size_t n,
                         std::uint64_t seed, XiVariant xi_variant) {
  const auto draws = sample_aux_batch(which, params, n, seed, xi_variant);
  Moments m;
  for (const auto v : draws) m.add(static_cast<double>(v));
  MeanCheck check;
  check.n = n;
  check.mean = m.mean();
  check.std_error = m.std_error();
  check.expected = aux_expected_mean(which, params, xi_variant);
  return check;
}

std::vector<DoobReport> doob_supremum_check(const BranchingProcess& process,
                                            std::span<const double> deltas, double horizon,
                                            std::size_t n, std::uint64_t seed,
                                            const ParallelOptions& parallel) {
  const double u = process.malthusian();
  if (!(u > 0.0)) throw std::invalid_argument("Doob check needs a supercritical process");
  if (deltas.empty()) return {};
  const double delta_max = *std::max_element(deltas.begin(), deltas.end());

  struct Tally {
    std::vector<std::uint64_t> hits;
    void merge(const Tally& o) {
      if (hits.size() < o.hits.size()) hits.resize(o.hits.size(), 0);
      for (std::size_t i = 0; i < o.hits.size(); ++i) hits[i] += o.hits[i];
    }
  };
  StopRule stop;
  stop.horizon = horizon;
  stop.pop_cap = kUncappedPopulation;
  auto tally = run_replicates<Tally>(n, parallel, [&](std::size_t i, Tally& t) {
    double sup = 1.0;  // W(0) = 1
    RunOptions options;
    options.on_event = [&](const SimState& s) {
      sup = std::max(sup, static_cast<double>(s.x) * std::exp(-u * s.t));
      return sup < delta_max;
    };
    (void)process.run(1, stop, stream_seed(seed, i), options);
    if (t.hits.size() < deltas.size()) t.hits.resize(deltas.size(), 0);
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      if (sup >= deltas[d]) ++t.hits[d];
    }
  });
  tally.hits.resize(deltas.size(), 0);

  std::vector<DoobReport> out;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    DoobReport r;
    r.delta = deltas[d];
    r.n = n;
    r.frequency = static_cast<double>(tally.hits[d]) / static_cast<double>(n);
    r.std_error = std::sqrt(r.frequency * (1.0 - r.frequency) / static_cast<double>(n));
    r.ci_low = wilson_interval(tally.hits[d], n, kZ95OneSided).low;
    r.bound = 1.0 / deltas[d];
    r.passed = r.ci_low <= r.bound;
    out.push_back(r);
  }
  return out;
}

DoobReport doob_supremum_check(const BranchingProcess& process, double delta, double horizon,
                               std::size_t n, std::uint64_t seed,
                               const ParallelOptions& parallel) {
  const double deltas[] = {delta};
  return doob_supremum_check(process, deltas, horizon, n, seed, parallel).front();
}

HarrisReport harris_variance_check(const Sampler& sampler, std::size_t big_m, std::size_t m,
                                   std::size_t n_resamples, std::uint64_t seed) {
  if (m > big_m) throw std::invalid_argument("harris_variance_check requires m <= M");
  if (n_resamples < 2) throw std::invalid_argument("harris_variance_check needs resamples");
  Moments draws;
  std::vector<double> trimmed(n_resamples);
  std::vector<double> sample(big_m);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    Rng rng(stream_seed(seed, r));
    for (auto& v : sample) {
      v = sampler(rng);
      draws.add(v);
    }
    trimmed[r] = trimmed_sum(sample, m);
  }
  Moments tm;
  for (const double v : trimmed) tm.add(v);
  const double mu = tm.mean();
  double m4 = 0.0;
  for (const double v : trimmed) m4 += std::pow(v - mu, 4);
  m4 /= static_cast<double>(n_resamples);

  HarrisReport report;
  report.big_m = big_m;
  report.m = m;
  report.resamples = n_resamples;
  report.trimmed_variance = tm.variance();
  report.variance_x1 = draws.variance();
  report.bound = static_cast<double>(big_m) * report.variance_x1;
  // Standard error of a sample variance: sqrt((mu4 - sigma^4) / n).
  const double var_se =
      std::sqrt(std::max(0.0, m4 - report.trimmed_variance * report.trimmed_variance) /
                static_cast<double>(n_resamples));
  report.relative_error = report.bound > 0.0 ? var_se / report.bound : 0.0;
  report.passed = report.trimmed_variance <= report.bound * (1.0 + 3.0 * report.relative_error);
  return report;
}

HolderReport holder_top_m_check(std::span<const double> pool, std::size_t big_m, std::size_t m,
                                double p, std::size_t n_resamples, std::uint64_t seed) {
  if (pool.empty()) throw std::invalid_argument("holder_top_m_check needs a sample pool");
  HolderReport report;
  report.p_norm = empirical_p_norm(pool, p);
  report.bound = holder_top_m_bound(report.p_norm, big_m, m, p);
  Moments tops;
  std::vector<double> sample(big_m);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    Rng rng(stream_seed(seed, r));
    for (auto& v : sample) {
      const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size()));
      v = pool[std::min(idx, pool.size() - 1)];
    }
    tops.add(top_m_sum(sample, m));
  }
  report.mean_top_sum = tops.mean();
  report.std_error = tops.std_error();
  report.passed = report.mean_top_sum <= report.bound;
  return report;
}

std::optional<double> lemma32_constant(const ModelParams& params, std::size_t n,
                                       std::uint64_t seed, XiVariant xi_variant) {
  const double s = xi_success_probability(params, xi_variant);
  if (!(s > 0.0)) return std::nullopt;
  const auto w = sample_aux_batch(AuxVariable::W, params, n, seed);
  Moments m;
  for (const auto v : w) m.add(static_cast<double>(v));
  const double ew = m.mean();
  return 9.0 * (m.variance() / (ew * ew) + (1.0 - s) / s);
}

std::vector<EtaSweepPoint> sweep_eta_over_lambda(const OffspringLaw& p, const OffspringLaw& gamma,
                                                 std::span<const double> lambdas,
                                                 const SimState& initial,
                                                 const EstimatorKnobs& knobs) {
  std::vector<EtaSweepPoint> out;
  out.reserve(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const ModelParams params(p, gamma, lambdas[i]);
    EtaSweepPoint pt;
    pt.lambda = lambdas[i];
    pt.derived = derive_params(params);
    pt.regime = classify_regime(pt.derived, gamma);
    pt.y_case = classify_y_survival(pt.derived);
    EstimatorKnobs k = knobs;
    k.seed = stream_seed(knobs.seed, i);
    pt.eta = estimate_eta(params, initial, k);
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<std::size_t> strict_local_maxima(const std::vector<EtaSweepPoint>& sweep,
                                             double sigmas) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < sweep.size(); ++i) {
    const auto& c = sweep[i].eta.summary;
    bool above_all = true;
    for (const std::size_t j : {i - 1, i + 1}) {
      const auto& nb = sweep[j].eta.summary;
      const double se = std::sqrt(c.std_error * c.std_error + nb.std_error * nb.std_error);
      if (!(c.point - nb.point > sigmas * se)) above_all = false;
    }
    if (above_all) out.push_back(i);
  }
  return out;
}

}  // namespace lysim
