#include <cmath>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "lysim/estimators.hpp"
#include "lysim/stats.hpp"

using namespace lysim;

namespace {

ModelParams make(std::vector<double> p, std::vector<double> gamma, double lambda) {
  return ModelParams(OffspringLaw(std::move(p)), OffspringLaw(std::move(gamma)), lambda);
}

EstimatorKnobs knobs(double horizon, std::size_t n, std::uint64_t seed) {
  EstimatorKnobs k;
  k.horizon = horizon;
  k.n = n;
  k.seed = seed;
  k.threshold = 100;
  k.pop_cap = 20000;
  k.sensitivity_subsample = 0;
  k.parallel.deterministic = true;
  return k;
}

}  // namespace

TEST_CASE("wilson interval") {
  const auto ci = wilson_interval(50, 100);
  CHECK(ci.low == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(ci.high == doctest::Approx(0.5962).epsilon(1e-3));
  const auto zero = wilson_interval(0, 100);
  CHECK(zero.low == 0.0);
  CHECK(zero.high > 0.0);
  CHECK(zero.high < 0.05);
}

TEST_CASE("t interval") {
  Moments m;
  for (const double v : {1.0, 2.0, 3.0, 4.0, 5.0}) m.add(v);
  CHECK(m.mean() == 3.0);
  CHECK(m.variance() == doctest::Approx(2.5));
  const auto ci = t_interval(m);
  // t_{0.975, 4} = 2.776
  CHECK(ci.high - 3.0 == doctest::Approx(2.776 * std::sqrt(0.5)).epsilon(1e-3));
}

TEST_CASE("least squares recovers a line") {
  const std::vector<double> xs{0, 1, 2, 3, 4};
  const std::vector<double> ys{1, 3, 5, 7, 9};
  const auto fit = least_squares(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("kaplan-meier with censoring") {
  // Events at 1, 3; censored at 2, 4.
  const std::vector<TimeObservation> obs{{1.0, true}, {2.0, false}, {3.0, true}, {4.0, false}};
  const std::vector<double> q{0.5, 1.5, 2.5, 3.5, 4.5};
  const auto curve = kaplan_meier(obs, q);
  CHECK(curve[0].survival == 1.0);
  CHECK(curve[1].survival == doctest::Approx(0.75));
  CHECK(curve[2].survival == doctest::Approx(0.75));
  CHECK(curve[3].survival == doctest::Approx(0.375));
  CHECK(curve[0].at_risk == 4);
  CHECK(curve[3].at_risk == 1);
  CHECK(curve[4].at_risk == 0);
}

TEST_CASE("ks statistic") {
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({0, 0}, {1, 1}) == 1.0);
  CHECK(ks_statistic({0, 1}, {1, 1}) == doctest::Approx(0.5));
  CHECK(ks_critical(1000, 1000, 0.05) == doctest::Approx(1.358 * std::sqrt(0.002)).epsilon(1e-3));
}

TEST_CASE("trimmed and top-m sums") {
  const std::vector<double> xs{5, 1, 4, 2, 3};
  CHECK(trimmed_sum(xs, 0) == 15.0);
  CHECK(trimmed_sum(xs, 2) == 6.0);
  CHECK(trimmed_sum(xs, 5) == 0.0);
  CHECK(top_m_sum(xs, 2) == 9.0);
  CHECK(top_m_sum(xs, 0) == 0.0);
  CHECK_THROWS(trimmed_sum(xs, 6));
}

TEST_CASE("holder bound") {
  // ||X||_2 M^{1/2} m^{1/2}
  CHECK(holder_top_m_bound(2.0, 100, 4, 2.0) == doctest::Approx(2.0 * 10.0 * 2.0));
  CHECK_THROWS(holder_top_m_bound(3.0, 50, 7, 1.0));
  const std::vector<double> xs{1.0, 1.0, 1.0};
  CHECK(empirical_p_norm(xs, 3.0) == doctest::Approx(1.0));
}

TEST_CASE("property: top-m sums of a sample never exceed the holder bound") {
  Rng rng(51);
  for (int i = 0; i < 200; ++i) {
    const std::size_t big_m = 1 + testgen::count(rng, 60);
    const std::size_t m = testgen::count(rng, big_m);
    std::vector<double> xs(big_m);
    for (auto& v : xs) v = rng.exponential(1.0);
    // With the empirical norm of the sample itself the bound is deterministic.
    const double p = 1.0 + 3.0 * rng.uniform();
    CHECK(top_m_sum(xs, m) <= holder_top_m_bound(empirical_p_norm(xs, p), big_m, m, p) + 1e-9);
  }
}

TEST_CASE("harris check: m = 0 matches the variance of the sum") {
  const Sampler exp1 = [](Rng& rng) { return rng.exponential(1.0); };
  const auto r = harris_variance_check(exp1, 20, 0, 20000, 52);
  CHECK(r.bound == doctest::Approx(20.0).epsilon(0.05));
  CHECK(r.trimmed_variance == doctest::Approx(20.0).epsilon(0.1));
  CHECK(r.passed);
  const auto all = harris_variance_check(exp1, 20, 20, 500, 53);
  CHECK(all.trimmed_variance == 0.0);
  CHECK(all.passed);
}

TEST_CASE("doob check with delta = 1 is always hit") {
  const BranchingProcess bp(1.0, OffspringLaw({0.25, 0.0, 0.75}));
  const auto r = doob_supremum_check(bp, 1.0, 5.0, 1000, 54);
  CHECK(r.frequency == 1.0);
  CHECK(r.bound == 1.0);
  CHECK(r.passed);
}

TEST_CASE("doob frequencies decrease in delta") {
  const BranchingProcess bp(1.0, OffspringLaw({0.25, 0.0, 0.75}));
  const std::vector<double> deltas{2.0, 4.0, 8.0};
  const auto reports = doob_supremum_check(bp, deltas, 10.0, 20000, 55);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].frequency >= reports[1].frequency);
  CHECK(reports[1].frequency >= reports[2].frequency);
  for (const auto& r : reports) CHECK(r.passed);
}

TEST_CASE("lemma 3.2 constant") {
  CHECK_FALSE(lemma32_constant(make({0.25, 0.0, 0.75}, {1.0}, 1.0), 1000, 56).has_value());
  const auto c = lemma32_constant(make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0), 4000, 57);
  REQUIRE(c.has_value());
  const double xi = 1.0 - std::exp(-0.5 * 1.25);
  CHECK(*c >= 9.0 * (1.0 - xi) / xi);
}

TEST_CASE("aux expectations") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  CHECK(aux_expected_mean(AuxVariable::U, params) == doctest::Approx(std::exp(0.5)));
  CHECK(aux_expected_mean(AuxVariable::V, params) == doctest::Approx(std::exp(0.125)));
  CHECK(aux_expected_mean(AuxVariable::W, params) == doctest::Approx(std::exp(0.75)));
  CHECK(aux_expected_mean(AuxVariable::Phi, params) ==
        doctest::Approx(0.5 * 0.25 * 2.0 * (std::exp(0.125) - 1.0) / 0.125));
  for (const auto which : {AuxVariable::U, AuxVariable::V, AuxVariable::W, AuxVariable::Phi}) {
    const auto check = aux_mean_check(which, params, 20000, 58);
    CHECK(check.z() < 4.5);
  }
  // beta = 0 takes the limit.
  const auto flat = make({0.5, 0.0, 0.5}, {1.0}, 0.0);
  CHECK(aux_expected_mean(AuxVariable::Phi, flat) == doctest::Approx(0.0));
}

TEST_CASE("coexistence classification") {
  Trajectory t;
  t.terminal = SimState{0, 5, 3.0};
  t.stop_reason = StopReason::XExtinct;
  t.x_zero_time = 3.0;
  auto o = classify_coexistence(t, 100);
  CHECK(o.verdict == Verdict::XExtinctFirst);
  CHECK(o.t_union == 3.0);

  t.terminal = SimState{150, 200, 30.0};
  t.stop_reason = StopReason::Horizon;
  t.x_zero_time.reset();
  o = classify_coexistence(t, 100);
  CHECK(o.verdict == Verdict::CoexistCensored);
  CHECK_FALSE(o.t_union.has_value());

  t.terminal = SimState{150, 20, 30.0};
  o = classify_coexistence(t, 100);
  CHECK(o.verdict == Verdict::BothAmbiguous);
  CHECK_FALSE(o.t_union.has_value());
}

TEST_CASE("zeta example in the coexistence regime") {
  const auto params = make({0.1, 0.1, 0.8}, {0.5, 0.5}, 0.3);
  REQUIRE(classify_regime(derive_params(params), params.gamma()).tag == RegimeTag::R3);
  const auto report = estimate_zeta(params, SimState{20, 5, 0.0}, knobs(30.0, 400, 59));
  CHECK(report.counts.total() == 400);
  CHECK(report.summary.point > 0.3);
  CHECK(report.summary.ci_low <= report.summary.point);
  CHECK(report.summary.ci_high >= report.summary.point);
}

TEST_CASE("zeta is small when the healthy process is subcritical") {
  const auto params = make({0.6, 0.0, 0.4}, {0.5, 0.5}, 1.0);
  const auto report = estimate_zeta(params, SimState{5, 2, 0.0}, knobs(40.0, 400, 60));
  CHECK(report.summary.ci_high < 0.02);
  CHECK(report.counts.total() == 400);
}

TEST_CASE("zeta in R2 shrinks as the horizon grows") {
  const auto params = make({0.25, 0.0, 0.75}, {0.0, 1.0}, 1.0);
  REQUIRE(classify_regime(derive_params(params), params.gamma()).tag == RegimeTag::R2);
  const auto short_run = estimate_zeta(params, SimState{20, 5, 0.0}, knobs(3.0, 400, 61));
  const auto long_run = estimate_zeta(params, SimState{20, 5, 0.0}, knobs(30.0, 400, 61));
  CHECK(long_run.summary.point <= short_run.summary.point);
}

TEST_CASE("censoring consistency: zeta at twice the horizon is no larger") {
  const auto params = make({0.1, 0.1, 0.8}, {0.5, 0.5}, 0.3);
  auto k = knobs(10.0, 1000, 67);
  k.sensitivity_subsample = 1000;
  const auto report = estimate_zeta(params, SimState{20, 5, 0.0}, k);
  REQUIRE(report.summary.sensitivity.has_value());
  const auto& sens = *report.summary.sensitivity;
  CHECK(sens.horizon == 20.0);
  CHECK(sens.point <= report.summary.point + 3.0 * report.summary.std_error);
  CHECK(report.summary.censored_fraction >= 0.0);
  CHECK(report.summary.censored_fraction <= 1.0);
}

TEST_CASE("estimators reject fewer than 100 replicates") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  CHECK_THROWS_AS(estimate_zeta(params, SimState{3, 2, 0.0}, knobs(5.0, 99, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_eta(params, SimState{3, 2, 0.0}, knobs(5.0, 50, 1)),
                  std::invalid_argument);
}

TEST_CASE("eta with gamma0 = 0 and a subcritical healthy process") {
  // alpha = -0.2 and beta' = -0.7: x dies out, then y follows.
  const auto params = make({0.6, 0.0, 0.4}, {0.0, 1.0}, 0.5);
  REQUIRE(derive_params(params).beta_prime < 0.0);
  const auto report = estimate_eta(params, SimState{2, 2, 0.0}, knobs(60.0, 400, 62));
  CHECK(report.summary.point > 0.97);
  // y can only die once x is gone.
  CHECK(report.counts.extinct_while_x_alive == 0);
}

TEST_CASE("eta counts are consistent") {
  const auto params = make({0.3, 0.1, 0.6}, {0.4, 0.6}, 0.5);
  const auto report = estimate_eta(params, SimState{5, 2, 0.0}, knobs(20.0, 300, 63));
  CHECK(report.counts.total() == 300);
  CHECK(report.counts.extinct_while_x_alive <= report.counts.extinct);
  CHECK(report.summary.point ==
        doctest::Approx(static_cast<double>(report.counts.extinct) / 300.0));
}

TEST_CASE("t_union in R1 has an exponential tail") {
  const auto params = make({0.6, 0.0, 0.4}, {0.5, 0.5}, 0.5);
  TailWindow window;
  window.t_min = 1.0;
  window.t_max = 8.0;
  const auto report = estimate_t_union(params, SimState{3, 3, 0.0}, knobs(30.0, 2000, 64), window);
  REQUIRE(report.exponential.has_value());
  CHECK(report.exponential->fit.r_squared > 0.9);
  CHECK(report.exponential->rate > 0.0);
  std::size_t censored = 0;
  for (const auto& o : report.observations) censored += o.observed ? 0 : 1;
  CHECK(report.summary.censored_fraction ==
        doctest::Approx(static_cast<double>(censored) / 2000.0));
  CHECK(report.observations.size() == 2000);
}

TEST_CASE("growth-rate recovery for a branching process") {
  const BranchingProcess bp(1.0, OffspringLaw({0.25, 0.0, 0.75}));
  const auto g = estimate_growth_rate(bp, 20, 0.0, 6.0, 400, 65);
  CHECK(g.mean_slope == doctest::Approx(0.5).epsilon(0.1));
  CHECK(g.survivors <= g.runs);
}

TEST_CASE("strict local maxima") {
  std::vector<EtaSweepPoint> sweep(5);
  const std::vector<double> values{0.1, 0.5, 0.2, 0.2, 0.3};
  for (std::size_t i = 0; i < values.size(); ++i) {
    sweep[i].eta.summary.point = values[i];
    sweep[i].eta.summary.std_error = 0.01;
  }
  const auto maxima = strict_local_maxima(sweep);
  REQUIRE(maxima.size() == 1);
  CHECK(maxima[0] == 1);
}

TEST_CASE("replicate seeds make estimators independent of the worker count") {
  const auto params = make({0.3, 0.1, 0.6}, {0.4, 0.6}, 0.5);
  auto a = knobs(10.0, 600, 66);
  a.parallel.workers = 1;
  auto b = a;
  b.parallel.workers = 4;
  b.parallel.batch_size = 37;
  const auto ra = estimate_zeta(params, SimState{5, 2, 0.0}, a);
  const auto rb = estimate_zeta(params, SimState{5, 2, 0.0}, b);
  CHECK(ra.counts.coexist == rb.counts.coexist);
  CHECK(ra.counts.x_first == rb.counts.x_first);
  CHECK(ra.counts.y_first == rb.counts.y_first);
  CHECK(ra.summary.point == rb.summary.point);
}
