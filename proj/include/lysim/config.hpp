#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lysim/estimators.hpp"
#include "lysim/model.hpp"
#include "lysim/simulator.hpp"

namespace lysim {

inline constexpr int kSchemaVersion = 1;

enum class EstimatorKind : std::uint8_t { Zeta, Eta, TUnion };
std::string_view to_string(EstimatorKind kind);

/// One cell of the parameter grid.
struct GridPoint {
  std::size_t index = 0;
  ModelParams params;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  // Grid axes; the experiment runs their cartesian product, lambda fastest.
  std::vector<OffspringLaw> p_grid;
  std::vector<OffspringLaw> gamma_grid;
  std::vector<double> lambda_grid;

  SimState initial{1, 1, 0.0};
  std::vector<EstimatorKind> estimators{EstimatorKind::Zeta};
  EstimatorKnobs knobs;  // horizon, threshold, n, master seed, pop_cap, parallelism
  TailWindow tail;
  /// Seed used verbatim for every cell instead of one derived from the master
  /// seed; reruns a single cell of an earlier sweep from its CSV seed column.
  std::optional<std::uint64_t> cell_seed;

  std::string output_dir;           // empty: LYSIM_OUTPUT_DIR, then ./lysim_out
  std::size_t trajectory_dumps = 0;  // JSONL trajectories written per grid point

  std::size_t grid_size() const {
    return p_grid.size() * gamma_grid.size() * lambda_grid.size();
  }
  std::vector<GridPoint> grid() const;
};

struct ConfigIssue {
  std::string path;  // e.g. "model.p" or "sweep.lambda[3]"; empty for parse errors
  std::string message;
  std::optional<int> line;    // 1-based
  std::optional<int> column;  // 1-based

  std::string describe() const;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigIssue> issues;  // every problem found, not just the first

  bool ok() const { return config.has_value(); }
};

ConfigResult parse_config_text(const std::string& text);
ConfigResult parse_config(const std::filesystem::path& file);

/// Canonical YAML with every default filled in. Equal configs dump equally.
std::string dump_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical dump, as 16 hex digits. The output directory
/// and worker count are left out.
std::string config_hash(const ExperimentConfig& config);

/// FNV-1a 64 of (p, gamma, lambda) in shortest round-trip form.
std::string param_hash(const ModelParams& params);

std::uint64_t fnv1a64(std::string_view bytes);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Output directory resolution: explicit value, then LYSIM_OUTPUT_DIR, then
/// "lysim_out".
std::filesystem::path resolve_output_dir(const std::string& configured);

}  // namespace lysim
