#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lysim/config.hpp"
#include "lysim/oracle.hpp"

namespace lysim {

inline constexpr std::string_view kVersion = "0.1.0";

/// Columns of every estimate CSV, in order.
inline constexpr const char* kEstimateColumns =
    "param_hash,alpha,beta,beta_prime,regime,estimate,ci_low,ci_high,n,censored_fraction,"
    "horizon,threshold,seed,config_hash";

/// Seed handed to the estimators of grid cell `index`.
std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t index);

struct PointFailure {
  std::size_t index = 0;
  std::string param_hash;
  std::string stage;  // estimator name or "trajectory"
  std::string message;
};

struct ExperimentReport {
  std::filesystem::path output_dir;
  std::string config_hash;
  std::size_t points = 0;
  std::vector<PointFailure> failures;
  std::vector<std::filesystem::path> files;

  bool ok() const { return failures.empty(); }
};

/// Runs every selected estimator on every grid cell and writes, under the
/// output directory:
///   derived.csv       one row of derived parameters per cell
///   <estimator>.csv   one estimate row per cell, columns kEstimateColumns
///   sensitivity.csv   the 2x-horizon rerun of zeta and eta
///   tail_fits.csv     exponential and power-law fits of the T_union tail
///   trajectories/     optional JSONL dumps
///   manifest.json     seed, config hash, version, failures
/// Files are rewritten on each run. A cell that throws is recorded as a
/// failure; the remaining cells still run. Progress goes to `log` if given.
ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Empirical law of the simulator on a capped grid at time t, indexed like
/// the oracle's state space; runs that leave the grid land in the escape
/// state. Run i uses stream_seed(seed, i).
std::vector<double> capped_empirical_distribution(const ModelParams& params,
                                                  const CappedGrid& grid, std::uint64_t x0,
                                                  std::uint64_t y0, double t, std::size_t n,
                                                  std::uint64_t seed,
                                                  const ParallelOptions& parallel = {});

/// Mean total variation between a law and the empirical law of n draws from
/// it, from the normal approximation of each cell, capped at 2 p per cell.
double expected_sampling_tv(const std::vector<double>& law, std::size_t n);

/// Oracle-vs-simulator and invariant checks on a small built-in instance.
/// Prints one line per check; true when every check passed.
bool run_validation_suite(std::ostream& out, std::uint64_t seed, const ParallelOptions& parallel);

}  // namespace lysim
