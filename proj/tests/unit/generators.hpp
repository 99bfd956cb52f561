#pragma once

// Hand-rolled generators for property tests. Each property draws its cases
// from a fixed seed so failures reproduce.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "lysim/model.hpp"
#include "lysim/rng.hpp"

namespace testgen {

// Random finite-support law: support length in [1, max_len], about a fifth of
// the cells zeroed, last cell absorbing the rounding.
inline lysim::OffspringLaw law(lysim::Rng& rng, std::size_t max_len = 6) {
  const std::size_t len = 1 + static_cast<std::size_t>(rng.uniform() * max_len);
  std::vector<double> w(len);
  double total = 0.0;
  for (auto& v : w) {
    v = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
    total += v;
  }
  if (total == 0.0) {
    w.back() = 1.0;
    total = 1.0;
  }
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < len; ++i) head += (w[i] /= total);
  w.back() = std::max(0.0, 1.0 - head);
  return lysim::OffspringLaw(std::move(w));
}

inline lysim::ModelParams params(lysim::Rng& rng, std::size_t max_len = 6,
                                 double max_lambda = 3.0) {
  for (;;) {
    auto p = law(rng, max_len);
    if (p[1] == 1.0) continue;
    return lysim::ModelParams(std::move(p), law(rng, max_len), max_lambda * rng.uniform());
  }
}

inline std::uint64_t count(lysim::Rng& rng, std::uint64_t max) {
  return static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(max + 1));
}

}  // namespace testgen
