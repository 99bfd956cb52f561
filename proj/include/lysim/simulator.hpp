#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "lysim/model.hpp"
#include "lysim/rng.hpp"

namespace lysim {

struct SimState {
  std::uint64_t x = 0;  // healthy cells
  std::uint64_t y = 0;  // infected cells
  double t = 0.0;

  friend bool operator==(const SimState&, const SimState&) = default;
};

enum class EventKind : std::uint8_t { HealthyBranch, InfectedBranch, Lysis };

/// One jump of the chain. For branching events `k` is the offspring count and
/// `applied` is zero; for lysis `k` is the sampled conversion count before
/// truncation and `applied` = min(k, x).
struct Event {
  EventKind kind = EventKind::HealthyBranch;
  std::uint64_t k = 0;
  std::uint64_t applied = 0;
  double time = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

/// State after `event` fires from `s`.
SimState apply(const SimState& s, const Event& event);

struct StopRule {
  double horizon = 30.0;
  std::uint64_t pop_cap = 10'000'000;  // stop once x + y exceeds this
  bool absorb_on_t_union = false;      // stop the first time x * y == 0
  bool absorb_on_y_extinct = false;    // stop the first time y == 0
  // Per-coordinate caps; exceeding either stops with GridEscape. Mirrors the
  // escape super-state of the capped-grid oracle.
  std::optional<std::uint64_t> x_cap;
  std::optional<std::uint64_t> y_cap;

  /// Throws std::invalid_argument unless horizon > 0 and pop_cap >= x0 + y0.
  void validate(const SimState& initial) const;
};

enum class StopReason : std::uint8_t {
  Horizon,
  PopCap,
  XExtinct,
  YExtinct,
  BothExtinct,
  GridEscape,
  Observer,
};

std::string_view to_string(StopReason reason);
std::string_view to_string(EventKind kind);

struct Trajectory {
  SimState initial;
  std::vector<Event> events;  // empty unless RunOptions::record_events
  SimState terminal;
  StopReason stop_reason = StopReason::Horizon;
  std::uint64_t n_events = 0;
  std::optional<double> x_zero_time;  // first time x hit 0
  std::optional<double> y_zero_time;  // first time y hit 0
  // State at each requested checkpoint time. Shorter than the request when
  // the run stopped for a reason other than the horizon or a rate-zero state.
  std::vector<SimState> checkpoints;
};

/// Reapply events from trajectory.initial. Equals trajectory.terminal up to
/// the terminal time stamp, which a horizon stop advances to the horizon.
SimState replay(const Trajectory& trajectory);

struct RunOptions {
  bool record_events = false;
  std::vector<double> checkpoints;  // ascending
  /// Called after every event; returning false stops with StopReason::Observer.
  std::function<bool(const SimState&)> on_event;
};

/// x + y (1 + lambda). Throws RateOverflow once counts leave the range where
/// doubles hold them exactly.
double total_rate(const SimState& s, const ModelParams& params);

/// A jump channel of the simulator: category, count drawn, aggregated rate,
/// and target state. Used to audit the sampling decomposition.
struct Channel {
  EventKind kind;
  std::uint64_t k;
  double rate;
  SimState target;
};

/// Exact direct-method simulator of the healthy/infected chain.
class Simulator {
 public:
  explicit Simulator(ModelParams params);

  const ModelParams& params() const { return params_; }
  double total_rate(const SimState& s) const;

  /// Draw the holding time and the next event. Throws AbsorbingState when the
  /// total rate is zero.
  std::pair<Event, SimState> step(const SimState& s, Rng& rng) const;

  /// Select which event fires, given that one does. `rate` is total_rate(s).
  /// The returned event carries no time stamp.
  Event draw_event(const SimState& s, double rate, Rng& rng) const;

  Trajectory run(const SimState& initial, const StopRule& stop, std::uint64_t seed,
                 const RunOptions& options = {}) const;
  Trajectory run(const SimState& initial, const StopRule& stop, Rng& rng,
                 const RunOptions& options = {}) const;

  /// Every (category, k) the sampler can produce from `s`, with its rate.
  std::vector<Channel> channels(const SimState& s) const;

 private:
  ModelParams params_;
  double infected_branch_rate_;  // per infected cell, 1 - p0
  double lysis_rate_;            // per infected cell, p0 + lambda
};

std::pair<Event, SimState> step(const SimState& s, const ModelParams& params, Rng& rng);
Trajectory run(const SimState& initial, const ModelParams& params, const StopRule& stop,
               std::uint64_t seed, const RunOptions& options = {});

/// Single-type Markov branching process: each individual lives an
/// Exponential(intensity) time, then is replaced by k ~ law offspring.
class BranchingProcess {
 public:
  BranchingProcess(double intensity, OffspringLaw law);

  double intensity() const { return intensity_; }
  const OffspringLaw& law() const { return law_; }
  double malthusian() const { return intensity_ * (law_.mean() - 1.0); }

  /// Counts are carried in SimState::x; y stays zero. Reaching zero stops the
  /// run with XExtinct.
  Trajectory run(std::uint64_t initial_count, const StopRule& stop, std::uint64_t seed,
                 const RunOptions& options = {}) const;
  Trajectory run(std::uint64_t initial_count, const StopRule& stop, Rng& rng,
                 const RunOptions& options = {}) const;

  /// Population at time t from `initial_count`, no cap.
  std::uint64_t sample_at(std::uint64_t initial_count, double t, Rng& rng) const;

 private:
  double intensity_;
  OffspringLaw law_;
};

Trajectory run_branching(std::uint64_t initial_count, double intensity, const OffspringLaw& law,
                         const StopRule& stop, std::uint64_t seed,
                         const RunOptions& options = {});

/// The healthy law with deaths suppressed: pi0 = 0, pi1 = p0 + p1, pik = pk.
OffspringLaw deaths_suppressed(const OffspringLaw& p);

enum class AuxVariable { U, V, W, Phi, Xi };

/// Two published success probabilities for xi:
///   LemmaStatement  1 - exp(-(1 - gamma0)(p0 + lambda))
///   ProofBody       1 - exp(-p0 (1 - gamma0)(1 + lambda))
enum class XiVariant { LemmaStatement, ProofBody };

double xi_success_probability(const ModelParams& params, XiVariant variant);

/// Samplers for the unit-time auxiliary variables:
///   U   healthy branching process (1, p) at time 1 from one cell
///   V   infected process (1 + lambda, q) at time 1 from one cell
///   W   deaths-suppressed process (1, pi) at time 1 from one cell
///   Phi sum of L conversion draws, L = Bernoulli(p0) successes over the
///       branching events of a unit-time V run
///   Xi  Bernoulli(xi_success_probability)
class AuxSampler {
 public:
  explicit AuxSampler(const ModelParams& params, XiVariant xi_variant = XiVariant::LemmaStatement);

  std::uint64_t sample(AuxVariable which, Rng& rng) const;

  const BranchingProcess& healthy() const { return healthy_; }
  const BranchingProcess& infected() const { return infected_; }
  const BranchingProcess& suppressed() const { return suppressed_; }

 private:
  std::uint64_t sample_phi(Rng& rng) const;

  OffspringLaw gamma_;
  double p0_;
  double xi_p_;
  BranchingProcess healthy_;
  BranchingProcess infected_;
  BranchingProcess suppressed_;
};

std::uint64_t sample_aux(AuxVariable which, const ModelParams& params, std::uint64_t seed,
                         XiVariant xi_variant = XiVariant::LemmaStatement);

/// n draws; draw i uses stream_seed(seed, i).
std::vector<std::uint64_t> sample_aux_batch(AuxVariable which, const ModelParams& params,
                                            std::size_t n, std::uint64_t seed,
                                            XiVariant xi_variant = XiVariant::LemmaStatement);

}  // namespace lysim
