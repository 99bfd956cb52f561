#include "lysim/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>

#include "lysim/errors.hpp"

namespace lysim {
namespace {

constexpr double kCompensatorTolerance = 1e-9;

std::array<std::uint64_t, 4> components(const CoupledStateA& s) {
  return {s.x, s.x_hat, s.y, s.y_hat};
}
std::array<std::uint64_t, 4> components(const CoupledStateB& s) {
  return {s.x, s.x_prime, s.x_hat, s.y};
}

std::uint64_t tracked_total(const CoupledStateA& s) { return s.x_hat + s.y_hat; }
std::uint64_t tracked_total(const CoupledStateB& s) { return s.x_hat + s.y; }

std::size_t pick_row(std::span<const double> rates, double u) {
  double acc = 0.0;
  std::size_t last_active = 0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] <= 0.0) continue;
    acc += rates[i];
    last_active = i;
    if (u < acc) return i;
  }
  return last_active;
}

template <class State>
std::string describe(const State& s) {
  std::ostringstream out;
  const auto c = components(s);
  out << "(" << c[0] << ", " << c[1] << ", " << c[2] << ", " << c[3] << ") at t=" << s.t;
  return out.str();
}

template <class Sim, class State>
CoupledTrajectory<State> run_coupled_loop(const Sim& sim, const State& initial,
                                          const StopRule& stop, std::uint64_t seed,
                                          const CoupledRunOptions& options,
                                          auto&& check) {
  if (!(stop.horizon > 0.0)) throw std::invalid_argument("stop rule horizon must be positive");
  if (stop.pop_cap < tracked_total(initial)) {
    throw std::invalid_argument("stop rule pop_cap below the initial population");
  }
  Rng rng(seed);
  CoupledTrajectory<State> traj;
  traj.initial = initial;
  std::size_t next_cp = 0;
  auto fill = [&](double limit, const State& s, bool inclusive) {
    while (next_cp < options.checkpoints.size()) {
      const double c = options.checkpoints[next_cp];
      if (inclusive ? c > limit : c >= limit) break;
      State snap = s;
      snap.t = c;
      traj.checkpoints.push_back(snap);
      ++next_cp;
    }
  };
  auto rule_stop = [&](const State& s) -> std::optional<StopReason> {
    if (stop.absorb_on_t_union && (s.x == 0 || s.y == 0)) {
      if (s.x == 0 && s.y == 0) return StopReason::BothExtinct;
      return s.x == 0 ? StopReason::XExtinct : StopReason::YExtinct;
    }
    if (stop.absorb_on_y_extinct && s.y == 0) return StopReason::YExtinct;
    if (tracked_total(s) > stop.pop_cap) return StopReason::PopCap;
    if ((stop.x_cap && s.x > *stop.x_cap) || (stop.y_cap && s.y > *stop.y_cap)) {
      return StopReason::GridEscape;
    }
    return std::nullopt;
  };

  State s = initial;
  if (options.assert_invariants) {
    check(s);
    ++traj.invariant_checks;
  }
  if (auto reason = rule_stop(s)) {
    traj.stop_reason = *reason;
    traj.terminal = s;
    return traj;
  }
  for (;;) {
    const auto rates = sim.row_rates(s);
    const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
    if (total <= 0.0) {
      fill(std::numeric_limits<double>::infinity(), s, true);
      traj.stop_reason = StopReason::BothExtinct;
      break;
    }
    const double t_next = s.t + rng.exponential(total);
    if (t_next > stop.horizon) {
      fill(stop.horizon, s, true);
      s.t = stop.horizon;
      traj.stop_reason = StopReason::Horizon;
      break;
    }
    fill(t_next, s, false);
    auto [ev, next] = sim.select(s, rates, total, rng);
    next.t = t_next;
    ev.time = t_next;
    s = next;
    ++traj.n_events;
    if (options.record_events) traj.events.push_back(ev);
    if (options.assert_invariants) {
      check(s);
      ++traj.invariant_checks;
    }
    if (auto reason = rule_stop(s)) {
      traj.stop_reason = *reason;
      break;
    }
  }
  traj.terminal = s;
  return traj;
}

}  // namespace

double kappa(std::uint64_t x_prime, std::uint64_t y, double r) {
  if (y == 0) return 1.0;
  return std::min(r * static_cast<double>(x_prime) / static_cast<double>(y), 1.0);
}

double compensator_rate(const CoupledStateB& s, const ModelParams& params) {
  const double k = kappa(s.x_prime, s.y, s.r);
  return (s.r * static_cast<double>(s.x_prime) - k * static_cast<double>(s.y)) *
         params.lysis_rate() * (1.0 - params.gamma()[0]);
}

double x_prime_death_rate(const CoupledStateB& s, const ModelParams& params) {
  const double p0 = params.p()[0];
  const double k = kappa(s.x_prime, s.y, s.r);
  const double overlap = static_cast<double>(std::min(s.x, s.x_prime));
  const double excess = static_cast<double>(s.x_prime) - overlap;
  // Rows 1 and 3 at k = 0, row 8 summed over k >= 1, row 9.
  return overlap * p0 + excess * p0 +
         static_cast<double>(s.y) * params.lysis_rate() * (1.0 - params.gamma()[0]) * k +
         compensator_rate(s, params);
}

std::vector<CoupledTransition<CoupledStateA>> transitions(const CoupledStateA& s,
                                                          const ModelParams& params) {
  std::vector<CoupledTransition<CoupledStateA>> out;
  const auto& p = params.p();
  const auto& g = params.gamma();
  const double lysis = params.lysis_rate();
  const double x = static_cast<double>(s.x);
  const double xh = static_cast<double>(s.x_hat - s.x);
  const double y = static_cast<double>(s.y);
  const double yh = static_cast<double>(s.y_hat - s.y);
  auto push = [&](int row, std::uint64_t k, double rate, CoupledStateA target) {
    if (rate > 0.0) out.push_back({row, k, rate, target});
  };
  for (std::uint64_t k = 0; k <= p.max_index(); ++k) {
    push(1, k, x * p[k], {s.x - 1 + k, s.x_hat - 1 + k, s.y, s.y_hat, s.t});
    push(2, k, xh * p[k], {s.x, s.x_hat - 1 + k, s.y, s.y_hat, s.t});
  }
  for (std::uint64_t k = 1; k <= p.max_index(); ++k) {
    push(3, k, y * p[k], {s.x, s.x_hat, s.y - 1 + k, s.y_hat - 1 + k, s.t});
    push(4, k, yh * p[k], {s.x, s.x_hat, s.y, s.y_hat - 1 + k, s.t});
  }
  for (std::uint64_t k = 0; k <= g.max_index(); ++k) {
    const std::uint64_t m = std::min(s.x, k);
    push(5, k, y * lysis * g[k], {s.x - m, s.x_hat, s.y - 1 + m, s.y_hat - 1 + k, s.t});
    push(6, k, yh * lysis * g[k], {s.x, s.x_hat, s.y, s.y_hat - 1 + k, s.t});
  }
  return out;
}

std::vector<CoupledTransition<CoupledStateB>> transitions(const CoupledStateB& s,
                                                          const ModelParams& params) {
  std::vector<CoupledTransition<CoupledStateB>> out;
  const auto& p = params.p();
  const auto& g = params.gamma();
  const double lysis = params.lysis_rate();
  const double k_mix = kappa(s.x_prime, s.y, s.r);
  const std::uint64_t lo = std::min(s.x, s.x_prime);
  const std::uint64_t hi = std::max(s.x, s.x_prime);
  const double y = static_cast<double>(s.y);
  auto push = [&](int row, std::uint64_t k, double rate, CoupledStateB target) {
    if (rate > 0.0) out.push_back({row, k, rate, target});
  };
  for (std::uint64_t k = 0; k <= p.max_index(); ++k) {
    push(1, k, static_cast<double>(lo) * p[k],
         {s.x + k - 1, s.x_prime + k - 1, s.x_hat + k - 1, s.y, s.t, s.r});
    push(2, k, static_cast<double>(s.x - lo) * p[k],
         {s.x + k - 1, s.x_prime, s.x_hat + k - 1, s.y, s.t, s.r});
    push(3, k, static_cast<double>(s.x_prime - lo) * p[k],
         {s.x, s.x_prime + k - 1, s.x_hat + k - 1, s.y, s.t, s.r});
    push(4, k, static_cast<double>(s.x_hat - hi) * p[k],
         {s.x, s.x_prime, s.x_hat + k - 1, s.y, s.t, s.r});
  }
  for (std::uint64_t k = 1; k <= p.max_index(); ++k) {
    push(5, k, y * p[k], {s.x, s.x_prime, s.x_hat, s.y + k - 1, s.t, s.r});
  }
  push(6, 0, y * lysis * g[0], {s.x, s.x_prime, s.x_hat, s.y - 1, s.t, s.r});
  for (std::uint64_t k = 1; k <= g.max_index(); ++k) {
    const std::uint64_t m = std::min(s.x, k);
    push(7, k, y * lysis * g[k] * (1.0 - k_mix),
         {s.x - m, s.x_prime, s.x_hat, s.y - 1 + m, s.t, s.r});
    push(8, k, y * lysis * g[k] * k_mix,
         {s.x - m, s.x_prime - 1, s.x_hat, s.y - 1 + m, s.t, s.r});
  }
  push(9, 0, std::max(0.0, compensator_rate(s, params)),
       {s.x, s.x_prime - 1, s.x_hat, s.y, s.t, s.r});
  return out;
}

void check_invariants(const CoupledStateA& s) {
  if (s.x > s.x_hat || s.y > s.y_hat) {
    throw InvariantViolation("coupling A ordering broken at " + describe(s));
  }
  if (s.x > 0 && s.y != s.y_hat) {
    throw InvariantViolation("coupling A: y != y_hat while x > 0 at " + describe(s));
  }
}

void check_invariants(const CoupledStateB& s, const ModelParams& params) {
  if (s.x_prime > s.x_hat || s.x > s.x_hat) {
    throw InvariantViolation("coupling B ordering broken at " + describe(s));
  }
  const double k = kappa(s.x_prime, s.y, s.r);
  if (!(k >= 0.0 && k <= 1.0)) {
    throw InvariantViolation("coupling B: kappa outside [0,1] at " + describe(s));
  }
  const double scale = std::max(1.0, s.r * static_cast<double>(s.x_prime));
  if (compensator_rate(s, params) < -kCompensatorTolerance * scale) {
    throw InvariantViolation("coupling B: negative compensating rate at " + describe(s));
  }
}

CoupledSimulatorA::CoupledSimulatorA(ModelParams params) : params_(std::move(params)) {}

std::array<double, 6> CoupledSimulatorA::row_rates(const CoupledStateA& s) const {
  const double no_death = 1.0 - params_.p()[0];
  const double lysis = params_.lysis_rate();
  const double unpaired_y = static_cast<double>(s.y_hat - s.y);
  return {static_cast<double>(s.x),
          static_cast<double>(s.x_hat - s.x),
          static_cast<double>(s.y) * no_death,
          unpaired_y * no_death,
          static_cast<double>(s.y) * lysis,
          unpaired_y * lysis};
}

std::pair<CoupledEvent, CoupledStateA> CoupledSimulatorA::step(const CoupledStateA& s,
                                                               Rng& rng) const {
  const auto rates = row_rates(s);
  const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
  if (total <= 0.0) throw AbsorbingState("coupled step from a state with total rate 0");
  const double dt = rng.exponential(total);
  auto out = select(s, rates, total, rng);
  out.second.t = s.t + dt;
  out.first.time = out.second.t;
  return out;
}

std::pair<CoupledEvent, CoupledStateA> CoupledSimulatorA::select(const CoupledStateA& s,
                                                                 const std::array<double, 6>& rates,
                                                                 double total, Rng& rng) const {
  const std::size_t row = pick_row(rates, rng.uniform() * total);
  const auto& p = params_.p();
  const auto& g = params_.gamma();

  CoupledStateA n = s;
  std::uint64_t k = 0;
  switch (row) {
    case 0:
      k = p.sample(rng.uniform());
      n.x = s.x - 1 + k;
      n.x_hat = s.x_hat - 1 + k;
      break;
    case 1:
      k = p.sample(rng.uniform());
      n.x_hat = s.x_hat - 1 + k;
      break;
    case 2:
      k = p.sample_positive(rng.uniform());
      n.y = s.y - 1 + k;
      n.y_hat = s.y_hat - 1 + k;
      break;
    case 3:
      k = p.sample_positive(rng.uniform());
      n.y_hat = s.y_hat - 1 + k;
      break;
    case 4: {
      k = g.sample(rng.uniform());
      const std::uint64_t m = std::min(s.x, k);
      n.x = s.x - m;
      n.y = s.y - 1 + m;
      n.y_hat = s.y_hat - 1 + k;
      break;
    }
    default:
      k = g.sample(rng.uniform());
      n.y_hat = s.y_hat - 1 + k;
      break;
  }
  return {CoupledEvent{static_cast<int>(row) + 1, k, n.t, components(n)}, n};
}

CoupledTrajectory<CoupledStateA> CoupledSimulatorA::run(const CoupledStateA& initial,
                                                        const StopRule& stop, std::uint64_t seed,
                                                        const CoupledRunOptions& options) const {
  return run_coupled_loop(*this, initial, stop, seed, options,
                          [](const CoupledStateA& s) { check_invariants(s); });
}

CoupledSimulatorB::CoupledSimulatorB(ModelParams params) : params_(std::move(params)) {}

std::array<double, 9> CoupledSimulatorB::row_rates(const CoupledStateB& s) const {
  const double p0 = params_.p()[0];
  const double g0 = params_.gamma()[0];
  const double lysis = params_.lysis_rate();
  const double k = kappa(s.x_prime, s.y, s.r);
  const std::uint64_t lo = std::min(s.x, s.x_prime);
  const std::uint64_t hi = std::max(s.x, s.x_prime);
  const double y = static_cast<double>(s.y);
  return {static_cast<double>(lo),
          static_cast<double>(s.x - lo),
          static_cast<double>(s.x_prime - lo),
          static_cast<double>(s.x_hat - hi),
          y * (1.0 - p0),
          y * lysis * g0,
          y * lysis * (1.0 - g0) * (1.0 - k),
          y * lysis * (1.0 - g0) * k,
          std::max(0.0, compensator_rate(s, params_))};
}

std::pair<CoupledEvent, CoupledStateB> CoupledSimulatorB::step(const CoupledStateB& s,
                                                               Rng& rng) const {
  const auto rates = row_rates(s);
  const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
  if (total <= 0.0) throw AbsorbingState("coupled step from a state with total rate 0");
  const double dt = rng.exponential(total);
  auto out = select(s, rates, total, rng);
  out.second.t = s.t + dt;
  out.first.time = out.second.t;
  return out;
}

std::pair<CoupledEvent, CoupledStateB> CoupledSimulatorB::select(const CoupledStateB& s,
                                                                 const std::array<double, 9>& rates,
                                                                 double total, Rng& rng) const {
  const std::size_t row = pick_row(rates, rng.uniform() * total);
  const auto& p = params_.p();
  const auto& g = params_.gamma();

  CoupledStateB n = s;
  std::uint64_t k = 0;
  switch (row) {
    case 0:
      k = p.sample(rng.uniform());
      n.x = s.x + k - 1;
      n.x_prime = s.x_prime + k - 1;
      n.x_hat = s.x_hat + k - 1;
      break;
    case 1:
      k = p.sample(rng.uniform());
      n.x = s.x + k - 1;
      n.x_hat = s.x_hat + k - 1;
      break;
    case 2:
      k = p.sample(rng.uniform());
      n.x_prime = s.x_prime + k - 1;
      n.x_hat = s.x_hat + k - 1;
      break;
    case 3:
      k = p.sample(rng.uniform());
      n.x_hat = s.x_hat + k - 1;
      break;
    case 4:
      k = p.sample_positive(rng.uniform());
      n.y = s.y + k - 1;
      break;
    case 5:
      n.y = s.y - 1;
      break;
    case 6:
    case 7: {
      k = g.sample_positive(rng.uniform());
      const std::uint64_t m = std::min(s.x, k);
      n.x = s.x - m;
      n.y = s.y - 1 + m;
      if (row == 7) n.x_prime = s.x_prime - 1;
      break;
    }
    default:
      n.x_prime = s.x_prime - 1;
      break;
  }
  return {CoupledEvent{static_cast<int>(row) + 1, k, n.t, components(n)}, n};
}

CoupledTrajectory<CoupledStateB> CoupledSimulatorB::run(const CoupledStateB& initial,
                                                        const StopRule& stop, std::uint64_t seed,
                                                        const CoupledRunOptions& options) const {
  if (!(initial.r > 0.0)) throw InvalidParams("coupling parameter r must be positive");
  return run_coupled_loop(*this, initial, stop, seed, options,
                          [this](const CoupledStateB& s) { check_invariants(s, params_); });
}

std::pair<CoupledEvent, CoupledStateA> step_coupled_a(const CoupledStateA& s,
                                                      const ModelParams& params, Rng& rng) {
  return CoupledSimulatorA(params).step(s, rng);
}

std::pair<CoupledEvent, CoupledStateB> step_coupled_b(const CoupledStateB& s,
                                                      const ModelParams& params, Rng& rng) {
  return CoupledSimulatorB(params).step(s, rng);
}

CoupledTrajectory<CoupledStateA> run_coupled(const CoupledStateA& initial,
                                             const ModelParams& params, const StopRule& stop,
                                             std::uint64_t seed,
                                             const CoupledRunOptions& options) {
  return CoupledSimulatorA(params).run(initial, stop, seed, options);
}

CoupledTrajectory<CoupledStateB> run_coupled(const CoupledStateB& initial,
                                             const ModelParams& params, const StopRule& stop,
                                             std::uint64_t seed,
                                             const CoupledRunOptions& options) {
  return CoupledSimulatorB(params).run(initial, stop, seed, options);
}

}  // namespace lysim
