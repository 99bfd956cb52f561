#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "lysim/errors.hpp"
#include "lysim/model.hpp"

using namespace lysim;

namespace {

ModelParams make(std::vector<double> p, std::vector<double> gamma, double lambda) {
  return ModelParams(OffspringLaw(std::move(p)), OffspringLaw(std::move(gamma)), lambda);
}

}  // namespace

TEST_CASE("offspring law validation rejects rather than renormalises") {
  CHECK_NOTHROW(OffspringLaw({0.25, 0.0, 0.75}));
  CHECK_THROWS_AS(OffspringLaw({0.25, 0.0, 0.749}), InvalidLaw);
  CHECK_THROWS_AS(OffspringLaw({}), InvalidLaw);
  CHECK_THROWS_AS(OffspringLaw({-0.1, 1.1}), InvalidLaw);
  CHECK_THROWS_AS(OffspringLaw({0.5, std::nan("")}), InvalidLaw);
  // Inside the absolute 1e-12 tolerance.
  CHECK_NOTHROW(OffspringLaw({0.5, 0.5 + 5e-13}));
  CHECK_THROWS_AS(OffspringLaw({0.5, 0.5 + 5e-12}), InvalidLaw);
}

TEST_CASE("mean of a law") {
  CHECK(mean(OffspringLaw({0.25, 0.0, 0.75})) == doctest::Approx(1.5));
  CHECK(mean(OffspringLaw::point_mass(1)) == 1.0);
  CHECK(mean(OffspringLaw({1.0})) == 0.0);
  const OffspringLaw law({0.25, 0.0, 0.75});
  CHECK(law.second_moment() == doctest::Approx(3.0));
  CHECK(law.variance() == doctest::Approx(0.75));
  CHECK(law[7] == 0.0);
}

TEST_CASE("inverse-CDF sampling") {
  const OffspringLaw law({0.25, 0.0, 0.75});
  CHECK(law.sample(0.0) == 0);
  CHECK(law.sample(0.2499) == 0);
  CHECK(law.sample(0.25) == 2);
  CHECK(law.sample(0.9999999) == 2);
  // Conditioned on k >= 1 the zero cell is never drawn.
  CHECK(law.sample_positive(0.0) == 2);
  const OffspringLaw g({0.5, 0.25, 0.25});
  CHECK(g.sample_positive(0.49) == 1);
  CHECK(g.sample_positive(0.51) == 2);
}

TEST_CASE("derive_q examples") {
  const auto q = derive_q(make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0));
  REQUIRE(q.probs().size() == 3);
  CHECK(q[0] == doctest::Approx(0.3125));
  CHECK(q[1] == doctest::Approx(0.3125));
  CHECK(q[2] == doctest::Approx(0.375));

  // gamma0 = 1, lambda = 0: lysis converts nothing and q reduces to p.
  const auto p = OffspringLaw({0.3, 0.1, 0.6});
  const auto q2 = derive_q(ModelParams(p, OffspringLaw({1.0}), 0.0));
  for (std::size_t k = 0; k < 3; ++k) CHECK(q2[k] == doctest::Approx(p[k]).epsilon(1e-15));
}

TEST_CASE("property: q sums to one and spans both supports") {
  Rng rng(101);
  for (int i = 0; i < 500; ++i) {
    const auto params = testgen::params(rng);
    const auto q = derive_q(params);
    double sum = 0.0;
    for (const double v : q.probs()) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(q.max_index() == std::max(params.p().max_index(), params.gamma().max_index()));
  }
}

TEST_CASE("derive_params examples") {
  const auto d = derive_params(make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0));
  CHECK(d.alpha == doctest::Approx(0.5));
  CHECK(d.beta == doctest::Approx(0.125));
  CHECK(d.beta_prime == doctest::Approx(-0.5));
  CHECK(d.q_bar == doctest::Approx(1.0625));

  const auto critical = derive_params(make({0.5, 0.0, 0.5}, {1.0}, 0.0));
  CHECK(critical.alpha == doctest::Approx(0.0));
  CHECK(critical.beta == doctest::Approx(0.0));

  const auto r2 = derive_params(make({0.2, 0.0, 0.8}, {0.0, 1.0}, 0.3));
  CHECK(r2.alpha == doctest::Approx(0.6));
  CHECK(r2.beta == doctest::Approx(0.8));
}

TEST_CASE("property: the two beta routes agree and beta' = alpha - lambda") {
  Rng rng(202);
  for (int i = 0; i < 1000; ++i) {
    const auto params = testgen::params(rng, 8, 10.0);
    const auto d = derive_params(params);
    CHECK(std::abs(beta_from_q(params) - beta_from_identity(params)) <= 1e-9);
    CHECK(d.beta_prime == doctest::Approx(d.alpha - params.lambda()));
  }
}

TEST_CASE("model params validation") {
  CHECK_THROWS_AS(make({0.0, 1.0}, {1.0}, 0.0), InvalidParams);
  CHECK_THROWS_AS(make({0.5, 0.0, 0.5}, {1.0}, -0.1), InvalidParams);
  CHECK_THROWS_AS(make({0.5, 0.0, 0.5}, {1.0}, INFINITY), InvalidParams);
}

TEST_CASE("x' law examples") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  const auto xp = derive_x_prime_law(params, 0.4);
  CHECK(xp.intensity == doctest::Approx(1.25));
  CHECK(xp.alpha_prime == doctest::Approx(0.25));

  const auto tiny = derive_x_prime_law(params, 1e-12);
  CHECK(tiny.intensity == doctest::Approx(1.0));
  CHECK(tiny.alpha_prime == doctest::Approx(0.5));
  for (std::size_t k = 0; k < 3; ++k) CHECK(tiny.law[k] == doctest::Approx(params.p()[k]));

  CHECK_THROWS(derive_x_prime_law(params, 0.0));
  CHECK_THROWS(derive_x_prime_law(params, -1.0));
}

TEST_CASE("property: intensity (mean(p') - 1) = alpha'") {
  Rng rng(303);
  for (int i = 0; i < 500; ++i) {
    const auto params = testgen::params(rng);
    const double r = 0.01 + 4.0 * rng.uniform();
    const auto xp = derive_x_prime_law(params, r);
    CHECK(std::abs(xp.intensity * (xp.law.mean() - 1.0) - xp.alpha_prime) <= 1e-12);
  }
}

TEST_CASE("regime examples") {
  const OffspringLaw g({0.5, 0.5});
  DerivedParams d;
  d.alpha = -0.1;
  d.beta = -0.3;
  d.beta_prime = -0.2;
  auto r = classify_regime(d, g);
  CHECK(r.tag == RegimeTag::R1);
  CHECK(r.eta_verdict == EtaVerdict::ExtinctCertain);

  d.alpha = 0.5;
  d.beta = 0.125;
  d.beta_prime = -0.5;
  r = classify_regime(d, g);
  CHECK(r.tag == RegimeTag::R3);
  CHECK(r.coexistence_possible);
  CHECK(r.eta_verdict == EtaVerdict::SurvivalPossible);

  d.alpha = 0.6;
  d.beta = 0.8;
  d.beta_prime = 0.3;
  r = classify_regime(d, g);
  CHECK(r.tag == RegimeTag::R2);
  CHECK(r.eta_verdict == EtaVerdict::SurvivalPossible);

  d.beta_prime = -0.3;
  CHECK(classify_regime(d, g).eta_verdict == EtaVerdict::ExtinctCertain);

  d.alpha = 0.4;
  d.beta = -0.1;
  r = classify_regime(d, g);
  CHECK(r.tag == RegimeTag::R4);
  CHECK(r.eta_verdict == EtaVerdict::ExtinctCertain);
}

TEST_CASE("regime boundaries are flagged") {
  const OffspringLaw g({0.5, 0.5});
  DerivedParams d;
  d.alpha = 0.3;
  d.beta = 0.3;
  auto r = classify_regime(d, g);
  CHECK(r.tag == RegimeTag::R2);
  CHECK(r.boundary);
  CHECK(regime_label(r) == "R2:boundary");

  d.alpha = 0.0;
  CHECK(classify_regime(d, g).tag == RegimeTag::R1);
  CHECK(classify_regime(d, g).boundary);

  d.alpha = 0.7;
  d.beta = 0.2;
  CHECK_FALSE(classify_regime(d, g).boundary);
}

TEST_CASE("property: regimes partition the (alpha, beta) plane") {
  Rng rng(404);
  const OffspringLaw g({0.5, 0.5});
  for (int i = 0; i < 5000; ++i) {
    DerivedParams d;
    d.alpha = 4.0 * rng.uniform() - 2.0;
    d.beta = 4.0 * rng.uniform() - 2.0;
    d.beta_prime = d.alpha - 3.0 * rng.uniform();
    const auto r = classify_regime(d, g);
    RegimeTag expected;
    if (d.alpha <= 0.0) {
      expected = RegimeTag::R1;
    } else if (d.beta <= 0.0) {
      expected = RegimeTag::R4;
    } else if (d.alpha <= d.beta) {
      expected = RegimeTag::R2;
    } else {
      expected = RegimeTag::R3;
    }
    CHECK(r.tag == expected);
    CHECK(r.coexistence_possible == (d.alpha > d.beta && d.beta > 0.0));
  }
}

TEST_CASE("property: gamma0 = 0, mean(Gamma) >= 1, p0 > 0 gives beta > alpha") {
  Rng rng(505);
  int tested = 0;
  while (tested < 300) {
    auto gamma = testgen::law(rng);
    if (gamma[0] != 0.0 || gamma.mean() < 1.0) {
      std::vector<double> w(gamma.probs().begin(), gamma.probs().end());
      if (w.size() < 2) w.push_back(0.0);
      w[1] += w[0];
      w[0] = 0.0;
      gamma = OffspringLaw(std::move(w));
    }
    auto p = testgen::law(rng);
    if (p[0] == 0.0 || p[1] == 1.0) continue;
    const auto d = derive_params(ModelParams(p, gamma, 3.0 * rng.uniform()));
    CHECK(d.beta > d.alpha);
    ++tested;
  }
}

TEST_CASE("y survival cases follow the lambda sweep") {
  // p = {0.5, 0, 0, 0.5}, Gamma = {0.2, 0.8}: all four cases occur.
  const OffspringLaw p({0.5, 0.0, 0.0, 0.5});
  const OffspringLaw g({0.2, 0.8});
  auto case_at = [&](double lambda) {
    return classify_y_survival(derive_params(ModelParams(p, g, lambda)));
  };
  CHECK(case_at(0.25) == YSurvivalCase::SelfSustaining);
  CHECK(case_at(1.0) == YSurvivalCase::DoomedAfterTakeover);
  CHECK(case_at(3.0) == YSurvivalCase::NeedsPrey);
  CHECK(case_at(5.0) == YSurvivalCase::Doomed);
  CHECK(classify_y_survival(derive_params(ModelParams(OffspringLaw({0.6, 0.0, 0.4}), g, 0.0))) ==
        YSurvivalCase::NotApplicable);
}
