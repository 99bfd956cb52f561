#include "lysim/offspring_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lysim/errors.hpp"

namespace lysim {
namespace {

std::uint64_t search_cdf(const std::vector<double>& cdf, double u) {
  // First index with cdf > u; rounding in the last entry falls back to the
  // largest index carrying mass.
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) {
    it = std::lower_bound(cdf.begin(), cdf.end(), cdf.back());
  }
  return static_cast<std::uint64_t>(it - cdf.begin());
}

}  // namespace

OffspringLaw::OffspringLaw(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidLaw("offspring law has empty support");
  double sum = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k) {
    const double p = probs_[k];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw InvalidLaw("offspring law entry " + std::to_string(k) +
                       " outside [0,1]: " + std::to_string(p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidLaw("offspring law sums to " + std::to_string(sum) +
                     ", expected 1 within 1e-12");
  }

  cdf_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());

  const double positive_mass = 1.0 - probs_[0];
  if (positive_mass > 0.0 && probs_.size() > 1) {
    positive_cdf_.resize(probs_.size() - 1);
    double acc = 0.0;
    for (std::size_t k = 1; k < probs_.size(); ++k) {
      acc += probs_[k];
      positive_cdf_[k - 1] = acc / positive_mass;
    }
  }
}

OffspringLaw OffspringLaw::point_mass(std::size_t k) {
  std::vector<double> probs(k + 1, 0.0);
  probs[k] = 1.0;
  return OffspringLaw(std::move(probs));
}

double OffspringLaw::mean() const {
  double m = 0.0;
  for (std::size_t k = 1; k < probs_.size(); ++k) m += static_cast<double>(k) * probs_[k];
  return m;
}

double OffspringLaw::second_moment() const {
  double m = 0.0;
  for (std::size_t k = 1; k < probs_.size(); ++k) {
    const double kk = static_cast<double>(k);
    m += kk * kk * probs_[k];
  }
  return m;
}

double OffspringLaw::variance() const {
  const double mu = mean();
  return second_moment() - mu * mu;
}

std::uint64_t OffspringLaw::sample(double u) const { return search_cdf(cdf_, u); }

std::uint64_t OffspringLaw::sample_positive(double u) const {
  if (positive_cdf_.empty()) throw InvalidLaw("law has no mass on k >= 1");
  return search_cdf(positive_cdf_, u) + 1;
}

double mean(const OffspringLaw& law) { return law.mean(); }

}  // namespace lysim
