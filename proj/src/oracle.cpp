#include "lysim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/SparseLU>

#include "lysim/errors.hpp"

namespace lysim {

void CappedGrid::validate() const {
  if (x_max < 2 || y_max < 2) throw std::invalid_argument("grid caps must be at least 2");
  if (x_max > kMaxCap || y_max > kMaxCap) {
    throw std::invalid_argument("grid caps above " + std::to_string(kMaxCap) +
                                " are outside the oracle's desk-scale range");
  }
}

Generator build_generator(const ModelParams& params, const CappedGrid& grid) {
  grid.validate();
  const auto& p = params.p();
  const auto& g = params.gamma();
  const double lysis = params.lysis_rate();
  const std::size_t n = grid.state_count();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * (p.max_index() * 2 + g.max_index() + 4));

  auto target_index = [&](std::uint64_t x, std::uint64_t y) {
    return (x > grid.x_max || y > grid.y_max) ? grid.escaped_index() : grid.index(x, y);
  };

  for (std::uint64_t x = 0; x <= grid.x_max; ++x) {
    for (std::uint64_t y = 0; y <= grid.y_max; ++y) {
      const std::size_t from = grid.index(x, y);
      std::map<std::size_t, double> row;  // aggregate rates per target
      const double xd = static_cast<double>(x);
      const double yd = static_cast<double>(y);
      if (x > 0) {
        for (std::uint64_t k = 0; k <= p.max_index(); ++k) {
          row[target_index(x - 1 + k, y)] += xd * p[k];
        }
      }
      if (y > 0) {
        for (std::uint64_t k = 1; k <= p.max_index(); ++k) {
          row[target_index(x, y - 1 + k)] += yd * p[k];
        }
        for (std::uint64_t k = 0; k <= g.max_index(); ++k) {
          const std::uint64_t m = std::min(x, k);
          row[target_index(x - m, y - 1 + m)] += yd * lysis * g[k];
        }
      }
      double exit = 0.0;
      for (const auto& [to, rate] : row) {
        if (to == from || rate <= 0.0) continue;
        triplets.emplace_back(static_cast<int>(from), static_cast<int>(to), rate);
        exit += rate;
      }
      if (exit > 0.0) triplets.emplace_back(static_cast<int>(from), static_cast<int>(from), -exit);
    }
  }

  Generator gen{grid, RateMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  gen.q.setFromTriplets(triplets.begin(), triplets.end());
  gen.q.makeCompressed();
  return gen;
}

std::vector<double> transient_distribution(const Generator& gen, std::uint64_t x0,
                                           std::uint64_t y0, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("transient time must be non-negative");
  if (x0 > gen.grid.x_max || y0 > gen.grid.y_max) {
    throw std::invalid_argument("initial state outside the grid");
  }
  const Eigen::Index n = gen.q.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[static_cast<Eigen::Index>(gen.grid.index(x0, y0))] = 1.0;

  double uniform_rate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) uniform_rate = std::max(uniform_rate, -gen.q.coeff(i, i));
  if (uniform_rate == 0.0 || t == 0.0) return {v.data(), v.data() + n};

  // P = I + Q / rate; accumulate Poisson(rate * t) weights of v P^k.
  const double mean = uniform_rate * t;
  const RateMatrix qt = gen.q.transpose();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  double covered = 0.0;
  const auto max_terms =
      static_cast<std::size_t>(mean + 20.0 * std::sqrt(mean) + 100.0);
  for (std::size_t k = 0; k <= max_terms; ++k) {
    const double kd = static_cast<double>(k);
    const double weight = std::exp(-mean + kd * std::log(mean) - std::lgamma(kd + 1.0));
    acc += weight * v;
    covered += weight;
    if (1.0 - covered < kUniformizationEpsilon && kd > mean) break;
    v += (qt * v) / uniform_rate;
  }
  return {acc.data(), acc.data() + n};
}

AbsorptionProbabilities absorption_probabilities(const Generator& gen, std::uint64_t x0,
                                                 std::uint64_t y0) {
  const auto& grid = gen.grid;
  if (x0 > grid.x_max || y0 > grid.y_max) throw std::invalid_argument("initial state outside the grid");
  if (x0 == 0) return {1.0, 0.0, 0.0};
  if (y0 == 0) return {0.0, 1.0, 0.0};

  // Interior states x, y >= 1 are transient; everything else absorbs.
  const std::uint64_t ny = grid.y_max;
  auto interior = [&](std::uint64_t x, std::uint64_t y) {
    return static_cast<Eigen::Index>((x - 1) * ny + (y - 1));
  };
  const Eigen::Index m = static_cast<Eigen::Index>(grid.x_max * grid.y_max);

  std::vector<Eigen::Triplet<double>> a_trip;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, 3);
  for (std::uint64_t x = 1; x <= grid.x_max; ++x) {
    for (std::uint64_t y = 1; y <= grid.y_max; ++y) {
      const Eigen::Index row = interior(x, y);
      const auto from = static_cast<Eigen::Index>(grid.index(x, y));
      if (!(gen.q.coeff(from, from) < 0.0)) {
        throw SingularSystem("interior state has no exit rate");
      }
      for (RateMatrix::InnerIterator it(gen.q, from); it; ++it) {
        const auto to = static_cast<std::size_t>(it.col());
        if (to == grid.escaped_index()) {
          b(row, 2) += it.value();
          continue;
        }
        const std::uint64_t tx = to / (ny + 1);
        const std::uint64_t ty = to % (ny + 1);
        if (tx == 0) {
          b(row, 0) += it.value();
        } else if (ty == 0) {
          b(row, 1) += it.value();
        } else {
          a_trip.emplace_back(row, interior(tx, ty), it.value());
        }
      }
    }
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(a_trip.begin(), a_trip.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw SingularSystem("absorption system is singular");
  const Eigen::MatrixXd h = lu.solve(-b);
  if (lu.info() != Eigen::Success || !h.allFinite()) {
    throw SingularSystem("absorption solve failed");
  }
  const Eigen::Index start = interior(x0, y0);
  return {h(start, 0), h(start, 1), h(start, 2)};
}

double extinction_fixed_point(const OffspringLaw& law) {
  const auto probs = law.probs();
  auto f = [&](double s) {
    double acc = 0.0;
    for (std::size_t k = probs.size(); k-- > 0;) acc = acc * s + probs[k];
    return acc;
  };
  auto df = [&](double s) {
    double acc = 0.0;
    for (std::size_t k = probs.size(); k-- > 1;) acc = acc * s + static_cast<double>(k) * probs[k];
    return acc;
  };
  double s = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    const double g = f(s) - s;
    if (g <= 0.0) break;
    const double slope = df(s) - 1.0;
    if (slope >= 0.0) break;  // only at the root of a critical law
    const double next = std::min(1.0, s - g / slope);
    if (next - s < 1e-15) {
      s = next;
      break;
    }
    s = next;
  }
  return s;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

}  // namespace lysim
