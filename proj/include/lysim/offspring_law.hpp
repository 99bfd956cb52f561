#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lysim {

/// Finite-support probability vector over offspring counts k = 0..max_index().
///
/// Entries must lie in [0, 1] and sum to one within kSumTolerance. Inputs that
/// fail the check are rejected, never renormalised.
class OffspringLaw {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit OffspringLaw(std::vector<double> probs);

  /// Point mass at k.
  static OffspringLaw point_mass(std::size_t k);

  std::span<const double> probs() const { return probs_; }
  std::size_t max_index() const { return probs_.size() - 1; }
  double operator[](std::size_t k) const {
    return k < probs_.size() ? probs_[k] : 0.0;
  }

  double mean() const;
  double second_moment() const;
  double variance() const;

  /// Inverse-CDF draw from a canonical uniform in [0, 1).
  std::uint64_t sample(double u) const;

  /// Inverse-CDF draw conditioned on k >= 1. Requires probs()[0] < 1.
  std::uint64_t sample_positive(double u) const;

  friend bool operator==(const OffspringLaw&, const OffspringLaw&) = default;

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;           // cdf_[k] = P(K <= k)
  std::vector<double> positive_cdf_;  // P(K <= k | K >= 1), index k - 1
};

/// Mean of a law, sum of k * p_k.
double mean(const OffspringLaw& law);

}  // namespace lysim
