#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/SparseCore>

#include "lysim/model.hpp"

namespace lysim {

/// States (x, y) in [0, x_max] x [0, y_max], plus one absorbing `escaped`
/// super-state that collects every jump leaving the box.
struct CappedGrid {
  static constexpr std::uint64_t kMaxCap = 200;

  std::uint64_t x_max = 0;
  std::uint64_t y_max = 0;

  /// Throws std::invalid_argument unless 2 <= caps <= kMaxCap.
  void validate() const;
  std::size_t state_count() const { return (x_max + 1) * (y_max + 1) + 1; }
  std::size_t index(std::uint64_t x, std::uint64_t y) const { return x * (y_max + 1) + y; }
  std::size_t escaped_index() const { return state_count() - 1; }
};

using RateMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Generator {
  CappedGrid grid;
  RateMatrix q;  // rows sum to zero; off-diagonals non-negative
};

/// Capped generator of the healthy/infected chain. Jumps landing outside the
/// box go to the escaped state, which has an all-zero row.
Generator build_generator(const ModelParams& params, const CappedGrid& grid);

/// Law of the capped chain at time t by uniformization. The Poisson series is
/// cut once the neglected mass falls below kUniformizationEpsilon; the
/// returned vector is not renormalised.
inline constexpr double kUniformizationEpsilon = 1e-12;
std::vector<double> transient_distribution(const Generator& gen, std::uint64_t x0,
                                           std::uint64_t y0, double t);

/// Probabilities of first entering {x = 0}, {y = 0 and x > 0}, or the escaped
/// state. The origin counts towards {x = 0}.
struct AbsorptionProbabilities {
  double p_x_boundary = 0.0;
  double p_y_boundary = 0.0;
  double p_escaped = 0.0;
};

/// Throws SingularSystem if some interior state cannot reach absorption.
AbsorptionProbabilities absorption_probabilities(const Generator& gen, std::uint64_t x0,
                                                 std::uint64_t y0);

/// Smallest root in [0, 1] of s = sum_k p_k s^k, by Newton iteration started
/// at 0. The iterates increase monotonically to the root.
double extinction_fixed_point(const OffspringLaw& law);

/// Total-variation distance between two probability vectors of equal length.
double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace lysim
