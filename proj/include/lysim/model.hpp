#pragma once

#include <string>
#include <string_view>

#include "lysim/offspring_law.hpp"

namespace lysim {

/// Healthy-cell offspring law p, lysis conversion law gamma, and the extra
/// infected-cell death rate lambda.
class ModelParams {
 public:
  ModelParams(OffspringLaw p, OffspringLaw gamma, double lambda);

  const OffspringLaw& p() const { return p_; }
  const OffspringLaw& gamma() const { return gamma_; }
  double lambda() const { return lambda_; }

  /// Lysis rate per infected cell, p0 + lambda.
  double lysis_rate() const { return p_[0] + lambda_; }

 private:
  OffspringLaw p_;
  OffspringLaw gamma_;
  double lambda_;
};

struct DerivedParams {
  double alpha = 0.0;       // Malthusian parameter of the healthy process
  double beta = 0.0;        // Malthusian parameter of the infected process with unlimited prey
  double beta_prime = 0.0;  // growth of the infected process once prey is gone
  OffspringLaw q = OffspringLaw::point_mass(0);
  double p_bar = 0.0;
  double gamma_bar = 0.0;
  double q_bar = 0.0;
};

/// Offspring law of the infected process in an unlimited supply of healthy
/// cells. Support runs to max(p.max_index(), gamma.max_index()).
OffspringLaw derive_q(const ModelParams& params);

/// Growth rates alpha, beta, beta'. Beta is computed from mean(q) and from the
/// closed-form identity; disagreement beyond 1e-9 raises InternalInconsistency.
DerivedParams derive_params(const ModelParams& params);

/// beta via (q_bar - 1)(1 + lambda).
double beta_from_q(const ModelParams& params);
/// beta via alpha + p0 * gamma_bar + lambda (gamma_bar - 1).
double beta_from_identity(const ModelParams& params);

/// Healthy branching process thinned by a fraction r of infection pressure.
struct XPrimeLaw {
  double intensity = 1.0;
  OffspringLaw law = OffspringLaw::point_mass(0);
  double alpha_prime = 0.0;
};

XPrimeLaw derive_x_prime_law(const ModelParams& params, double r);

enum class RegimeTag { R1, R2, R3, R4 };
enum class EtaVerdict { ExtinctCertain, SurvivalPossible };

struct Regime {
  RegimeTag tag = RegimeTag::R1;
  EtaVerdict eta_verdict = EtaVerdict::ExtinctCertain;
  bool coexistence_possible = false;
  /// alpha, beta, or alpha - beta sits within kBoundaryTolerance of zero.
  bool boundary = false;
  /// gamma0 > 0: infected cells can die out even while healthy cells remain.
  bool y_can_die_while_x_alive = false;
};

inline constexpr double kBoundaryTolerance = 1e-12;

/// R1: alpha <= 0. R4: beta <= 0 < alpha. R2: 0 < alpha <= beta.
/// R3: 0 < beta < alpha. Checked in that order.
Regime classify_regime(const DerivedParams& d, const OffspringLaw& gamma);

/// Finer split of the alpha > 0 half-plane used when sweeping lambda.
enum class YSurvivalCase {
  NotApplicable,       // alpha <= 0
  SelfSustaining,      // 0 < alpha < beta, beta' > 0
  DoomedAfterTakeover, // 0 < alpha < beta, beta' <= 0
  NeedsPrey,           // 0 < beta < alpha
  Doomed,              // beta <= 0
};

YSurvivalCase classify_y_survival(const DerivedParams& d);

std::string_view to_string(RegimeTag tag);
std::string_view to_string(EtaVerdict verdict);
std::string_view to_string(YSurvivalCase c);
/// "R3", or "R2:boundary" when the boundary flag is set.
std::string regime_label(const Regime& regime);

}  // namespace lysim
