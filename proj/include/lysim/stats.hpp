#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lysim {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for a binomial proportion; two-sided 95% by default.
Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = kZ95);

/// z for a one-sided 95% bound.
inline constexpr double kZ95OneSided = 1.6448536269514722;

/// Running moments; merge() is associative up to floating-point rounding.
struct Moments {
  std::uint64_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  void merge(const Moments& other) {
    n += other.n;
    sum += other.sum;
    sum_sq += other.sum_sq;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  /// Unbiased sample variance.
  double variance() const;
  double std_error() const;
};

/// Two-sided 95% Student-t interval for a mean.
Interval t_interval(const Moments& m);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of ys on xs.
LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

/// Right-censored observation for survival analysis.
struct TimeObservation {
  double time = 0.0;
  bool observed = true;  // false: censored at `time`
};

/// Kaplan-Meier survival estimate evaluated at each query time, plus the
/// number still at risk just after that time.
struct SurvivalPoint {
  double t = 0.0;
  double survival = 1.0;
  std::uint64_t at_risk = 0;
};

std::vector<SurvivalPoint> kaplan_meier(std::vector<TimeObservation> observations,
                                        std::span<const double> query_times);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b| for count data.
double ks_statistic(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b);

/// Large-sample KS critical value at level `level` (0.05, 0.01, or 0.001).
double ks_critical(std::size_t n, std::size_t m, double level);

/// Sum of the size - m smallest entries, i.e. the sample with its m largest
/// order statistics removed. Requires m <= xs.size().
double trimmed_sum(std::span<const double> xs, std::size_t m);

/// Sum of the m largest entries.
double top_m_sum(std::span<const double> xs, std::size_t m);

/// ||X||_p M^{1/p} m^{1/q}, 1/p + 1/q = 1: an upper bound on the expected sum
/// of any m order statistics out of M identically distributed draws.
double holder_top_m_bound(double p_norm, std::size_t big_m, std::size_t m, double p);

/// (E|X|^p)^{1/p} of a sample.
double empirical_p_norm(std::span<const double> xs, double p);

}  // namespace lysim
