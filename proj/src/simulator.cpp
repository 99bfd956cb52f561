#include "lysim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lysim/errors.hpp"

namespace lysim {
namespace {

constexpr std::uint64_t kExactCountLimit = 1ULL << 53;

void check_counts(const SimState& s) {
  if (s.x > kExactCountLimit || s.y > kExactCountLimit) {
    throw RateOverflow("population counts exceed 2^53; total rate no longer exact");
  }
}

/// Shared event loop. `Model` supplies rate(state) and draw(state, rng).
template <class Model>
Trajectory run_loop(const Model& model, const SimState& initial, const StopRule& stop, Rng& rng,
                    const RunOptions& options) {
  stop.validate(initial);

  Trajectory traj;
  traj.initial = initial;
  traj.checkpoints.reserve(options.checkpoints.size());
  std::size_t next_checkpoint = 0;

  auto fill_checkpoints_before = [&](double limit, const SimState& s, bool inclusive) {
    while (next_checkpoint < options.checkpoints.size()) {
      const double c = options.checkpoints[next_checkpoint];
      if (inclusive ? c > limit : c >= limit) break;
      SimState snap = s;
      snap.t = c;
      traj.checkpoints.push_back(snap);
      ++next_checkpoint;
    }
  };

  SimState s = initial;
  if (s.x == 0) traj.x_zero_time = s.t;
  if (s.y == 0) traj.y_zero_time = s.t;

  auto rule_stop = [&](const SimState& st) -> std::optional<StopReason> {
    if (stop.absorb_on_t_union && (st.x == 0 || st.y == 0)) {
      if (st.x == 0 && st.y == 0) return StopReason::BothExtinct;
      return st.x == 0 ? StopReason::XExtinct : StopReason::YExtinct;
    }
    if (stop.absorb_on_y_extinct && st.y == 0) {
      return st.x == 0 ? StopReason::BothExtinct : StopReason::YExtinct;
    }
    if (st.x + st.y > stop.pop_cap) return StopReason::PopCap;
    if ((stop.x_cap && st.x > *stop.x_cap) || (stop.y_cap && st.y > *stop.y_cap)) {
      return StopReason::GridEscape;
    }
    return std::nullopt;
  };

  if (auto reason = rule_stop(s)) {
    traj.stop_reason = *reason;
    traj.terminal = s;
    return traj;
  }

  for (;;) {
    const double rate = model.rate(s);
    if (rate <= 0.0) {
      // Nothing can fire again: the state is frozen for all later times.
      fill_checkpoints_before(std::numeric_limits<double>::infinity(), s, true);
      traj.stop_reason = model.absorbed_reason(s);
      break;
    }
    const double dt = rng.exponential(rate);
    const double t_next = s.t + dt;
    if (t_next > stop.horizon) {
      fill_checkpoints_before(stop.horizon, s, true);
      s.t = stop.horizon;
      traj.stop_reason = StopReason::Horizon;
      break;
    }
    fill_checkpoints_before(t_next, s, false);

    Event ev = model.draw(s, rng);
    ev.time = t_next;
    s = apply(s, ev);
    s.t = t_next;
    ++traj.n_events;
    if (options.record_events) traj.events.push_back(ev);
    if (s.x == 0 && !traj.x_zero_time) traj.x_zero_time = s.t;
    if (s.y == 0 && !traj.y_zero_time) traj.y_zero_time = s.t;

    if (auto reason = rule_stop(s)) {
      traj.stop_reason = *reason;
      break;
    }
    if (options.on_event && !options.on_event(s)) {
      traj.stop_reason = StopReason::Observer;
      break;
    }
  }
  traj.terminal = s;
  return traj;
}

struct TwoTypeModel {
  const Simulator& sim;
  double rate(const SimState& s) const { return sim.total_rate(s); }
  Event draw(const SimState& s, Rng& rng) const { return sim.draw_event(s, sim.total_rate(s), rng); }
  StopReason absorbed_reason(const SimState&) const { return StopReason::BothExtinct; }
};

struct SingleTypeModel {
  const BranchingProcess& bp;
  double rate(const SimState& s) const {
    check_counts(s);
    return bp.intensity() * static_cast<double>(s.x);
  }
  Event draw(const SimState&, Rng& rng) const {
    return Event{EventKind::HealthyBranch, bp.law().sample(rng.uniform()), 0, 0.0};
  }
  StopReason absorbed_reason(const SimState&) const { return StopReason::XExtinct; }
};

}  // namespace

SimState apply(const SimState& s, const Event& event) {
  SimState out = s;
  out.t = event.time;
  switch (event.kind) {
    case EventKind::HealthyBranch:
      out.x = s.x - 1 + event.k;
      break;
    case EventKind::InfectedBranch:
      out.y = s.y - 1 + event.k;
      break;
    case EventKind::Lysis:
      out.x = s.x - event.applied;
      out.y = s.y - 1 + event.applied;
      break;
  }
  return out;
}

void StopRule::validate(const SimState& initial) const {
  if (!(horizon > 0.0)) throw std::invalid_argument("stop rule horizon must be positive");
  if (pop_cap < initial.x + initial.y) {
    throw std::invalid_argument("stop rule pop_cap below the initial population");
  }
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Horizon: return "horizon";
    case StopReason::PopCap: return "pop_cap";
    case StopReason::XExtinct: return "x_extinct";
    case StopReason::YExtinct: return "y_extinct";
    case StopReason::BothExtinct: return "both_extinct";
    case StopReason::GridEscape: return "grid_escape";
    case StopReason::Observer: return "observer";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::HealthyBranch: return "healthy_branch";
    case EventKind::InfectedBranch: return "infected_branch";
    case EventKind::Lysis: return "lysis";
  }
  return "?";
}

SimState replay(const Trajectory& trajectory) {
  SimState s = trajectory.initial;
  for (const auto& ev : trajectory.events) s = apply(s, ev);
  return s;
}

double total_rate(const SimState& s, const ModelParams& params) {
  check_counts(s);
  const double rate =
      static_cast<double>(s.x) + static_cast<double>(s.y) * (1.0 + params.lambda());
  if (!std::isfinite(rate)) throw RateOverflow("total rate is not finite");
  return rate;
}

Simulator::Simulator(ModelParams params)
    : params_(std::move(params)),
      infected_branch_rate_(1.0 - params_.p()[0]),
      lysis_rate_(params_.lysis_rate()) {}

double Simulator::total_rate(const SimState& s) const { return lysim::total_rate(s, params_); }

std::pair<Event, SimState> Simulator::step(const SimState& s, Rng& rng) const {
  const double rate = total_rate(s);
  if (rate <= 0.0) throw AbsorbingState("step called from a state with total rate 0");
  const double dt = rng.exponential(rate);
  Event ev = draw_event(s, rate, rng);
  ev.time = s.t + dt;
  return {ev, apply(s, ev)};
}

Event Simulator::draw_event(const SimState& s, double rate, Rng& rng) const {
  const double healthy = static_cast<double>(s.x);
  const double infected_branch = static_cast<double>(s.y) * infected_branch_rate_;
  const double u = rng.uniform() * rate;

  Event ev;
  if (u < healthy) {
    ev.kind = EventKind::HealthyBranch;
    ev.k = params_.p().sample(rng.uniform());
  } else if (u < healthy + infected_branch) {
    ev.kind = EventKind::InfectedBranch;
    ev.k = params_.p().sample_positive(rng.uniform());
  } else {
    ev.kind = EventKind::Lysis;
    ev.k = params_.gamma().sample(rng.uniform());
    ev.applied = std::min(ev.k, s.x);
  }
  return ev;
}

std::vector<Channel> Simulator::channels(const SimState& s) const {
  std::vector<Channel> out;
  const auto& p = params_.p();
  const auto& g = params_.gamma();
  auto push = [&](EventKind kind, std::uint64_t k, double rate, std::uint64_t applied) {
    if (rate <= 0.0) return;
    Event ev{kind, k, applied, s.t};
    out.push_back(Channel{kind, k, rate, apply(s, ev)});
  };
  const double x = static_cast<double>(s.x);
  const double y = static_cast<double>(s.y);
  for (std::size_t k = 0; k <= p.max_index(); ++k) push(EventKind::HealthyBranch, k, x * p[k], 0);
  if (infected_branch_rate_ > 0.0) {
    for (std::size_t k = 1; k <= p.max_index(); ++k) {
      push(EventKind::InfectedBranch, k, y * infected_branch_rate_ * (p[k] / infected_branch_rate_),
           0);
    }
  }
  for (std::size_t k = 0; k <= g.max_index(); ++k) {
    push(EventKind::Lysis, k, y * lysis_rate_ * g[k], std::min<std::uint64_t>(k, s.x));
  }
  return out;
}

Trajectory Simulator::run(const SimState& initial, const StopRule& stop, std::uint64_t seed,
                          const RunOptions& options) const {
  Rng rng(seed);
  return run(initial, stop, rng, options);
}

Trajectory Simulator::run(const SimState& initial, const StopRule& stop, Rng& rng,
                          const RunOptions& options) const {
  return run_loop(TwoTypeModel{*this}, initial, stop, rng, options);
}

std::pair<Event, SimState> step(const SimState& s, const ModelParams& params, Rng& rng) {
  return Simulator(params).step(s, rng);
}

Trajectory run(const SimState& initial, const ModelParams& params, const StopRule& stop,
               std::uint64_t seed, const RunOptions& options) {
  return Simulator(params).run(initial, stop, seed, options);
}

BranchingProcess::BranchingProcess(double intensity, OffspringLaw law)
    : intensity_(intensity), law_(std::move(law)) {
  if (!(intensity_ > 0.0) || !std::isfinite(intensity_)) {
    throw InvalidParams("branching intensity must be positive");
  }
}

Trajectory BranchingProcess::run(std::uint64_t initial_count, const StopRule& stop,
                                 std::uint64_t seed, const RunOptions& options) const {
  Rng rng(seed);
  return run(initial_count, stop, rng, options);
}

Trajectory BranchingProcess::run(std::uint64_t initial_count, const StopRule& stop, Rng& rng,
                                 const RunOptions& options) const {
  StopRule rule = stop;
  // The y coordinate is unused; y == 0 must not count as an absorption.
  rule.absorb_on_t_union = false;
  rule.absorb_on_y_extinct = false;
  Trajectory traj = run_loop(SingleTypeModel{*this}, SimState{initial_count, 0, 0.0}, rule, rng,
                             options);
  traj.y_zero_time.reset();
  return traj;
}

std::uint64_t BranchingProcess::sample_at(std::uint64_t initial_count, double t, Rng& rng) const {
  std::uint64_t n = initial_count;
  double now = 0.0;
  while (n > 0) {
    if (n > kExactCountLimit) throw RateOverflow("branching population exceeds 2^53");
    now += rng.exponential(intensity_ * static_cast<double>(n));
    if (now > t) break;
    n = n - 1 + law_.sample(rng.uniform());
  }
  return n;
}

Trajectory run_branching(std::uint64_t initial_count, double intensity, const OffspringLaw& law,
                         const StopRule& stop, std::uint64_t seed, const RunOptions& options) {
  return BranchingProcess(intensity, law).run(initial_count, stop, seed, options);
}

OffspringLaw deaths_suppressed(const OffspringLaw& p) {
  std::vector<double> pi(std::max<std::size_t>(p.max_index() + 1, 2), 0.0);
  pi[1] = p[0] + p[1];
  for (std::size_t k = 2; k < pi.size(); ++k) pi[k] = p[k];
  return OffspringLaw(std::move(pi));
}

double xi_success_probability(const ModelParams& params, XiVariant variant) {
  const double p0 = params.p()[0];
  const double g0 = params.gamma()[0];
  const double lambda = params.lambda();
  const double exponent = variant == XiVariant::LemmaStatement
                              ? (1.0 - g0) * (p0 + lambda)
                              : p0 * (1.0 - g0) * (1.0 + lambda);
  return -std::expm1(-exponent);
}

AuxSampler::AuxSampler(const ModelParams& params, XiVariant xi_variant)
    : gamma_(params.gamma()),
      p0_(params.p()[0]),
      xi_p_(xi_success_probability(params, xi_variant)),
      healthy_(1.0, params.p()),
      infected_(1.0 + params.lambda(), derive_q(params)),
      suppressed_(1.0, deaths_suppressed(params.p())) {}

std::uint64_t AuxSampler::sample(AuxVariable which, Rng& rng) const {
  switch (which) {
    case AuxVariable::U: return healthy_.sample_at(1, 1.0, rng);
    case AuxVariable::V: return infected_.sample_at(1, 1.0, rng);
    case AuxVariable::W: return suppressed_.sample_at(1, 1.0, rng);
    case AuxVariable::Phi: return sample_phi(rng);
    case AuxVariable::Xi: return rng.bernoulli(xi_p_) ? 1 : 0;
  }
  return 0;
}

std::uint64_t AuxSampler::sample_phi(Rng& rng) const {
  std::uint64_t n = 1;
  double now = 0.0;
  std::uint64_t successes = 0;
  const double intensity = infected_.intensity();
  while (n > 0) {
    now += rng.exponential(intensity * static_cast<double>(n));
    if (now > 1.0) break;
    n = n - 1 + infected_.law().sample(rng.uniform());
    if (rng.bernoulli(p0_)) ++successes;
  }
  std::uint64_t phi = 0;
  for (std::uint64_t i = 0; i < successes; ++i) phi += gamma_.sample(rng.uniform());
  return phi;
}

std::uint64_t sample_aux(AuxVariable which, const ModelParams& params, std::uint64_t seed,
                         XiVariant xi_variant) {
  Rng rng(seed);
  return AuxSampler(params, xi_variant).sample(which, rng);
}

std::vector<std::uint64_t> sample_aux_batch(AuxVariable which, const ModelParams& params,
                                            std::size_t n, std::uint64_t seed,
                                            XiVariant xi_variant) {
  const AuxSampler sampler(params, xi_variant);
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(stream_seed(seed, i));
    out[i] = sampler.sample(which, rng);
  }
  return out;
}

}  // namespace lysim
