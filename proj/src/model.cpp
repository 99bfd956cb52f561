#include "lysim/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lysim/errors.hpp"

namespace lysim {

ModelParams::ModelParams(OffspringLaw p, OffspringLaw gamma, double lambda)
    : p_(std::move(p)), gamma_(std::move(gamma)), lambda_(lambda) {
  if (!std::isfinite(lambda_) || lambda_ < 0.0) {
    throw InvalidParams("lambda must be a finite non-negative rate");
  }
  if (p_[1] == 1.0) {
    throw InvalidParams("degenerate healthy law p1 = 1 is excluded");
  }
}

OffspringLaw derive_q(const ModelParams& params) {
  const auto& p = params.p();
  const auto& g = params.gamma();
  const double lysis = params.lysis_rate();
  const double scale = 1.0 + params.lambda();
  const std::size_t size = std::max(p.max_index(), g.max_index()) + 1;

  std::vector<double> q(size);
  // A single cell can round to a few ulps above one, e.g. Gamma = delta_1.
  q[0] = std::min(1.0, g[0] * lysis / scale);
  for (std::size_t k = 1; k < size; ++k) q[k] = std::min(1.0, (p[k] + g[k] * lysis) / scale);
  return OffspringLaw(std::move(q));
}

double beta_from_q(const ModelParams& params) {
  return (derive_q(params).mean() - 1.0) * (1.0 + params.lambda());
}

double beta_from_identity(const ModelParams& params) {
  const double alpha = params.p().mean() - 1.0;
  const double gamma_bar = params.gamma().mean();
  return alpha + params.p()[0] * gamma_bar + params.lambda() * (gamma_bar - 1.0);
}

DerivedParams derive_params(const ModelParams& params) {
  DerivedParams d;
  d.p_bar = params.p().mean();
  d.gamma_bar = params.gamma().mean();
  d.q = derive_q(params);
  d.q_bar = d.q.mean();
  d.alpha = d.p_bar - 1.0;

  const double via_q = (d.q_bar - 1.0) * (1.0 + params.lambda());
  const double via_identity = beta_from_identity(params);
  if (std::abs(via_q - via_identity) > 1e-9) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "beta derivations disagree: " << via_q << " vs " << via_identity;
    throw InternalInconsistency(msg.str());
  }
  d.beta = via_identity;
  d.beta_prime = d.alpha - params.lambda();
  return d;
}

XPrimeLaw derive_x_prime_law(const ModelParams& params, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw InvalidParams("thinning parameter r must be positive");
  }
  const auto& p = params.p();
  const double extra = r * params.lysis_rate() * (1.0 - params.gamma()[0]);
  const double intensity = 1.0 + extra;

  std::vector<double> law(p.max_index() + 1);
  law[0] = (p[0] + extra) / intensity;
  for (std::size_t k = 1; k < law.size(); ++k) law[k] = p[k] / intensity;

  // Rounding in the division can push the sum a few ulps off; absorb it in p'0.
  double tail = 0.0;
  for (std::size_t k = 1; k < law.size(); ++k) tail += law[k];
  law[0] = std::max(0.0, 1.0 - tail);

  XPrimeLaw out{intensity, OffspringLaw(std::move(law)), 0.0};
  out.alpha_prime = (p.mean() - 1.0) - extra;
  return out;
}

Regime classify_regime(const DerivedParams& d, const OffspringLaw& gamma) {
  Regime r;
  r.y_can_die_while_x_alive = gamma[0] > 0.0;
  r.boundary = std::abs(d.alpha) <= kBoundaryTolerance ||
               std::abs(d.beta) <= kBoundaryTolerance ||
               std::abs(d.alpha - d.beta) <= kBoundaryTolerance;

  if (d.alpha <= 0.0) {
    r.tag = RegimeTag::R1;
    r.eta_verdict = EtaVerdict::ExtinctCertain;
  } else if (d.beta <= 0.0) {
    r.tag = RegimeTag::R4;
    r.eta_verdict = EtaVerdict::ExtinctCertain;
  } else if (d.alpha <= d.beta) {
    r.tag = RegimeTag::R2;
    r.eta_verdict =
        d.beta_prime > 0.0 ? EtaVerdict::SurvivalPossible : EtaVerdict::ExtinctCertain;
  } else {
    r.tag = RegimeTag::R3;
    r.eta_verdict = EtaVerdict::SurvivalPossible;
    r.coexistence_possible = true;
  }
  return r;
}

YSurvivalCase classify_y_survival(const DerivedParams& d) {
  if (d.alpha <= 0.0) return YSurvivalCase::NotApplicable;
  if (d.beta <= 0.0) return YSurvivalCase::Doomed;
  if (d.beta < d.alpha) return YSurvivalCase::NeedsPrey;
  return d.beta_prime > 0.0 ? YSurvivalCase::SelfSustaining
                            : YSurvivalCase::DoomedAfterTakeover;
}

std::string_view to_string(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::R1: return "R1";
    case RegimeTag::R2: return "R2";
    case RegimeTag::R3: return "R3";
    case RegimeTag::R4: return "R4";
  }
  return "?";
}

std::string_view to_string(EtaVerdict verdict) {
  return verdict == EtaVerdict::ExtinctCertain ? "extinct-certain" : "survival-possible";
}

std::string_view to_string(YSurvivalCase c) {
  switch (c) {
    case YSurvivalCase::NotApplicable: return "not-applicable";
    case YSurvivalCase::SelfSustaining: return "self-sustaining";
    case YSurvivalCase::DoomedAfterTakeover: return "doomed-after-takeover";
    case YSurvivalCase::NeedsPrey: return "needs-prey";
    case YSurvivalCase::Doomed: return "doomed";
  }
  return "?";
}

std::string regime_label(const Regime& regime) {
  std::string label(to_string(regime.tag));
  if (regime.boundary) label += ":boundary";
  return label;
}

}  // namespace lysim
