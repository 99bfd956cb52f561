#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lysim {

/// SplitMix64 finaliser. Bijective on 64-bit words with full avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Per-replicate stream seed. Part of the reproducibility contract:
///   stream_seed(master, i) = splitmix64(splitmix64(master) ^ i)
/// Changing this changes every published result.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ index);
}

/// Random source for one simulation run: a 64-bit Mersenne Twister seeded
/// with a single word, read through fixed bit-level conversions so streams
/// are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Canonical uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Exponential holding time with the given rate, by inverse CDF.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lysim
