#include "lysim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace lysim {

Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  // Clamp so the point estimate always lies inside despite rounding at 0 and 1.
  return {std::min(phat, std::max(0.0, centre - half)), std::max(phat, std::min(1.0, centre + half))};
}

double Moments::variance() const {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double v = (sum_sq - sum * sum / nn) / (nn - 1.0);
  return std::max(0.0, v);
}

double Moments::std_error() const {
  return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

Interval t_interval(const Moments& m) {
  const double mu = m.mean();
  if (m.n < 2) return {mu, mu};
  boost::math::students_t dist(static_cast<double>(m.n - 1));
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  const double half = q * m.std_error();
  return {mu - half, mu + half};
}

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("least_squares: size mismatch");
  LinearFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::vector<SurvivalPoint> kaplan_meier(std::vector<TimeObservation> observations,
                                        std::span<const double> query_times) {
  std::sort(observations.begin(), observations.end(),
            [](const TimeObservation& a, const TimeObservation& b) {
              // Events before censorings at tied times.
              return a.time < b.time || (a.time == b.time && a.observed && !b.observed);
            });
  std::vector<SurvivalPoint> out;
  out.reserve(query_times.size());
  double survival = 1.0;
  std::uint64_t at_risk = observations.size();
  std::size_t i = 0;
  for (const double q : query_times) {
    while (i < observations.size() && observations[i].time <= q) {
      const double t = observations[i].time;
      std::uint64_t deaths = 0;
      std::uint64_t leaving = 0;
      while (i < observations.size() && observations[i].time == t) {
        if (observations[i].observed) ++deaths;
        ++leaving;
        ++i;
      }
      if (deaths > 0 && at_risk > 0) {
        survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      }
      at_risk -= leaving;
    }
    out.push_back({q, survival, at_risk});
  }
  return out;
}

double ks_statistic(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const std::uint64_t v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(std::size_t n, std::size_t m, double level) {
  double c = 1.358;
  if (level <= 0.001) {
    c = 1.949;
  } else if (level <= 0.01) {
    c = 1.628;
  }
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

double trimmed_sum(std::span<const double> xs, std::size_t m) {
  if (m > xs.size()) throw std::invalid_argument("trimmed_sum: m exceeds sample size");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.end() - static_cast<std::ptrdiff_t>(m), 0.0);
}

double top_m_sum(std::span<const double> xs, std::size_t m) {
  if (m > xs.size()) throw std::invalid_argument("top_m_sum: m exceeds sample size");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(m), sorted.end(), 0.0);
}

double holder_top_m_bound(double p_norm, std::size_t big_m, std::size_t m, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("holder_top_m_bound requires p > 1");
  if (m > big_m) throw std::invalid_argument("holder_top_m_bound requires m <= M");
  const double q = p / (p - 1.0);
  return p_norm * std::pow(static_cast<double>(big_m), 1.0 / p) *
         std::pow(static_cast<double>(m), 1.0 / q);
}

double empirical_p_norm(std::span<const double> xs, double p) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (const double v : xs) acc += std::pow(std::abs(v), p);
  return std::pow(acc / static_cast<double>(xs.size()), 1.0 / p);
}

}  // namespace lysim
