#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "lysim/model.hpp"
#include "lysim/rng.hpp"
#include "lysim/simulator.hpp"

namespace lysim {

/// (X, X-hat, Y, Y-hat): the two-type chain coupled to its dominating
/// branching processes. Holds x <= x_hat, y <= y_hat, and y == y_hat while
/// x > 0.
struct CoupledStateA {
  std::uint64_t x = 0;
  std::uint64_t x_hat = 0;
  std::uint64_t y = 0;
  std::uint64_t y_hat = 0;
  double t = 0.0;

  friend bool operator==(const CoupledStateA&, const CoupledStateA&) = default;
};

/// (X, X', X-hat, Y) with thinning parameter r. X' is a branching process
/// that discounts a fraction of infection pressure; x' <= x_hat always.
struct CoupledStateB {
  std::uint64_t x = 0;
  std::uint64_t x_prime = 0;
  std::uint64_t x_hat = 0;
  std::uint64_t y = 0;
  double t = 0.0;
  double r = 1.0;

  friend bool operator==(const CoupledStateB&, const CoupledStateB&) = default;
};

/// min(r x' / y, 1), with the y -> 0+ limit of 1 at y == 0.
double kappa(std::uint64_t x_prime, std::uint64_t y, double r);

/// Compensating rate (r x' - kappa y)(p0 + lambda)(1 - gamma0) of the last
/// row of the thinned coupling. Non-negative up to rounding.
double compensator_rate(const CoupledStateB& s, const ModelParams& params);

/// Aggregate rate at which x' loses one cell:
/// p0 x' + kappa y (p0 + lambda)(1 - gamma0) + compensator.
double x_prime_death_rate(const CoupledStateB& s, const ModelParams& params);

/// One row of a coupling table evaluated at a particular k.
template <class State>
struct CoupledTransition {
  int row;  // 1-based table row
  std::uint64_t k;
  double rate;
  State target;
};

/// Every (row, k) transition out of `s`, listed straight from the rate
/// tables. Rows with zero rate are omitted.
std::vector<CoupledTransition<CoupledStateA>> transitions(const CoupledStateA& s,
                                                          const ModelParams& params);
std::vector<CoupledTransition<CoupledStateB>> transitions(const CoupledStateB& s,
                                                          const ModelParams& params);

/// Throws InvariantViolation with a description when an ordering fails.
void check_invariants(const CoupledStateA& s);
void check_invariants(const CoupledStateB& s, const ModelParams& params);

struct CoupledEvent {
  int row = 0;
  std::uint64_t k = 0;
  double time = 0.0;
  std::array<std::uint64_t, 4> after{};  // state components in declaration order
};

struct CoupledRunOptions {
  bool assert_invariants = true;
  bool record_events = false;
  std::vector<double> checkpoints;  // ascending
};

template <class State>
struct CoupledTrajectory {
  State initial;
  std::vector<CoupledEvent> events;
  State terminal;
  StopReason stop_reason = StopReason::Horizon;
  std::uint64_t n_events = 0;
  std::uint64_t invariant_checks = 0;
  std::vector<State> checkpoints;
};

/// Exact simulator for the (X, X-hat, Y, Y-hat) coupling. One categorical
/// draw selects the row among all active rows; a second draws k.
class CoupledSimulatorA {
 public:
  explicit CoupledSimulatorA(ModelParams params);

  const ModelParams& params() const { return params_; }
  std::array<double, 6> row_rates(const CoupledStateA& s) const;
  std::pair<CoupledEvent, CoupledStateA> step(const CoupledStateA& s, Rng& rng) const;
  /// Apply the row chosen by one categorical draw; no holding time.
  std::pair<CoupledEvent, CoupledStateA> select(const CoupledStateA& s, const std::array<double, 6>& rates,
                                              double total, Rng& rng) const;

  /// Stop rules act on (x, y); pop_cap bounds x_hat + y_hat.
  CoupledTrajectory<CoupledStateA> run(const CoupledStateA& initial, const StopRule& stop,
                                       std::uint64_t seed,
                                       const CoupledRunOptions& options = {}) const;

 private:
  ModelParams params_;
};

/// Exact simulator for the thinned (X, X', X-hat, Y) coupling; kappa is
/// recomputed from the current state at every step.
class CoupledSimulatorB {
 public:
  explicit CoupledSimulatorB(ModelParams params);

  const ModelParams& params() const { return params_; }
  std::array<double, 9> row_rates(const CoupledStateB& s) const;
  std::pair<CoupledEvent, CoupledStateB> step(const CoupledStateB& s, Rng& rng) const;
  /// Apply the row chosen by one categorical draw; no holding time.
  std::pair<CoupledEvent, CoupledStateB> select(const CoupledStateB& s, const std::array<double, 9>& rates,
                                              double total, Rng& rng) const;

  /// Stop rules act on (x, y); pop_cap bounds x_hat + y.
  CoupledTrajectory<CoupledStateB> run(const CoupledStateB& initial, const StopRule& stop,
                                       std::uint64_t seed,
                                       const CoupledRunOptions& options = {}) const;

 private:
  ModelParams params_;
};

std::pair<CoupledEvent, CoupledStateA> step_coupled_a(const CoupledStateA& s,
                                                      const ModelParams& params, Rng& rng);
std::pair<CoupledEvent, CoupledStateB> step_coupled_b(const CoupledStateB& s,
                                                      const ModelParams& params, Rng& rng);

CoupledTrajectory<CoupledStateA> run_coupled(const CoupledStateA& initial,
                                             const ModelParams& params, const StopRule& stop,
                                             std::uint64_t seed,
                                             const CoupledRunOptions& options = {});
CoupledTrajectory<CoupledStateB> run_coupled(const CoupledStateB& initial,
                                             const ModelParams& params, const StopRule& stop,
                                             std::uint64_t seed,
                                             const CoupledRunOptions& options = {});

}  // namespace lysim
