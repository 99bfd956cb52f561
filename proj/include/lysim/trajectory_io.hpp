#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lysim/couplings.hpp"
#include "lysim/simulator.hpp"

namespace lysim {

/// JSONL trajectory format, one event per line:
///   {"t": 0.41, "kind": "lysis", "k_or_gamma": 3, "x_after": 7, "y_after": 4}
/// For lysis `k_or_gamma` is the conversion draw before truncation by x.
/// Coupled dumps carry a 1-based table `row` instead of `kind` and one
/// `<component>_after` field per coordinate.
///
/// Requires a trajectory recorded with RunOptions::record_events.
void write_jsonl(std::ostream& out, const Trajectory& trajectory);
void write_jsonl(std::ostream& out, const CoupledTrajectory<CoupledStateA>& trajectory);
void write_jsonl(std::ostream& out, const CoupledTrajectory<CoupledStateB>& trajectory);

struct JsonlEvent {
  double t = 0.0;
  std::string kind;
  std::uint64_t k_or_gamma = 0;
  std::uint64_t x_after = 0;
  std::uint64_t y_after = 0;
};

/// Parse a single-chain dump. Throws std::runtime_error naming the line on
/// malformed input.
std::vector<JsonlEvent> read_jsonl(std::istream& in);

}  // namespace lysim
