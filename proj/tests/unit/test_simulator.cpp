#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "generators.hpp"
#include "lysim/errors.hpp"
#include "lysim/oracle.hpp"
#include "lysim/simulator.hpp"
#include "lysim/stats.hpp"
#include "lysim/trajectory_io.hpp"

using namespace lysim;

namespace {

ModelParams make(std::vector<double> p, std::vector<double> gamma, double lambda) {
  return ModelParams(OffspringLaw(std::move(p)), OffspringLaw(std::move(gamma)), lambda);
}

// Independent listing of the jump rates out of (x, y): one entry per
// (category, k) as the rate table reads, before any aggregation.
std::map<std::tuple<int, std::uint64_t>, std::pair<double, SimState>> table_rates(
    const SimState& s, const ModelParams& params) {
  std::map<std::tuple<int, std::uint64_t>, std::pair<double, SimState>> out;
  const auto& p = params.p();
  const auto& g = params.gamma();
  const double x = static_cast<double>(s.x);
  const double y = static_cast<double>(s.y);
  for (std::uint64_t k = 0; k <= p.max_index(); ++k) {
    if (x * p[k] > 0.0) out[{0, k}] = {x * p[k], SimState{s.x - 1 + k, s.y, 0.0}};
  }
  for (std::uint64_t k = 1; k <= p.max_index(); ++k) {
    if (y * p[k] > 0.0) out[{1, k}] = {y * p[k], SimState{s.x, s.y - 1 + k, 0.0}};
  }
  for (std::uint64_t k = 0; k <= g.max_index(); ++k) {
    const double rate = y * (p[0] + params.lambda()) * g[k];
    const std::uint64_t m = std::min<std::uint64_t>(k, s.x);
    if (rate > 0.0) out[{2, k}] = {rate, SimState{s.x - m, s.y - 1 + m, 0.0}};
  }
  return out;
}

int kind_code(EventKind kind) {
  switch (kind) {
    case EventKind::HealthyBranch: return 0;
    case EventKind::InfectedBranch: return 1;
    case EventKind::Lysis: return 2;
  }
  return -1;
}

}  // namespace

TEST_CASE("total rate examples") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  CHECK(total_rate(SimState{3, 2, 0.0}, params) == doctest::Approx(7.0));
  CHECK(total_rate(SimState{0, 0, 0.0}, params) == 0.0);
  CHECK(total_rate(SimState{0, 4, 0.0}, params) == doctest::Approx(8.0));
}

TEST_CASE("lysis truncates the conversion draw at x") {
  const SimState s{3, 1, 0.0};
  const SimState after = apply(s, Event{EventKind::Lysis, 5, 3, 0.5});
  CHECK(after.x == 0);
  CHECK(after.y == 3);
  const SimState none = apply(s, Event{EventKind::Lysis, 0, 0, 0.5});
  CHECK(none.x == 3);
  CHECK(none.y == 0);
}

TEST_CASE("property: simulator channels match the rate table") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto params = testgen::params(rng);
    const SimState s{testgen::count(rng, 12), testgen::count(rng, 12), 0.0};
    const Simulator sim(params);
    const auto expected = table_rates(s, params);

    std::map<std::tuple<int, std::uint64_t>, std::pair<double, SimState>> got;
    double total = 0.0;
    for (const auto& c : sim.channels(s)) {
      auto& slot = got[{kind_code(c.kind), c.k}];
      slot.first += c.rate;
      slot.second = c.target;
      total += c.rate;
    }
    REQUIRE(got.size() == expected.size());
    for (const auto& [key, value] : expected) {
      REQUIRE(got.count(key) == 1);
      CHECK(got[key].first == doctest::Approx(value.first).epsilon(1e-12));
      CHECK(got[key].second.x == value.second.x);
      CHECK(got[key].second.y == value.second.y);
    }
    CHECK(total == doctest::Approx(sim.total_rate(s)).epsilon(1e-12));
  }
}

TEST_CASE("empirical event frequencies match channel rates") {
  const auto params = make({0.25, 0.1, 0.65}, {0.3, 0.3, 0.4}, 0.5);
  const Simulator sim(params);
  const SimState s{2, 3, 0.0};
  const double total = sim.total_rate(s);
  std::map<std::pair<int, std::uint64_t>, double> expected;
  for (const auto& c : sim.channels(s)) expected[{kind_code(c.kind), c.k}] += c.rate / total;

  Rng rng(12);
  const std::size_t n = 200000;
  std::map<std::pair<int, std::uint64_t>, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    const Event ev = sim.draw_event(s, total, rng);
    ++counts[{kind_code(ev.kind), ev.k}];
  }
  for (const auto& [key, prob] : expected) {
    const double freq = static_cast<double>(counts[key]) / static_cast<double>(n);
    const double se = std::sqrt(prob * (1.0 - prob) / static_cast<double>(n));
    CHECK(std::abs(freq - prob) <= 5.0 * se + 1e-12);
  }
  for (const auto& [key, c] : counts) CHECK(expected.count(key) == 1);
}

TEST_CASE("with y = 0 only healthy branching fires, lambda is irrelevant") {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const auto params = testgen::params(rng);
    const Simulator sim(params);
    const SimState s{1 + testgen::count(rng, 8), 0, 0.0};
    for (const auto& c : sim.channels(s)) CHECK(c.kind == EventKind::HealthyBranch);
    CHECK(sim.total_rate(s) == doctest::Approx(static_cast<double>(s.x)));
  }
}

TEST_CASE("with x = 0 lysis only removes the infected cell") {
  const auto params = make({0.25, 0.0, 0.75}, {0.0, 0.5, 0.5}, 1.0);
  const auto traj = run(SimState{0, 4, 0.0}, params, StopRule{5.0, 1000}, 14,
                        RunOptions{.record_events = true});
  for (const auto& ev : traj.events) {
    if (ev.kind == EventKind::Lysis) CHECK(ev.applied == 0);
    CHECK(ev.kind != EventKind::HealthyBranch);
  }
  CHECK(traj.terminal.x == 0);
}

TEST_CASE("all-death law empties the population") {
  const auto params = make({1.0}, {1.0}, 0.0);
  const auto traj = run(SimState{5, 0, 0.0}, params, StopRule{100.0, 1000}, 15);
  CHECK(traj.terminal.x == 0);
  CHECK(traj.terminal.y == 0);
  CHECK(traj.n_events == 5);
  CHECK(traj.stop_reason == StopReason::BothExtinct);
}

TEST_CASE("same seed, same trajectory") {
  const auto params = make({0.2, 0.1, 0.7}, {0.4, 0.6}, 0.3);
  const RunOptions opts{.record_events = true};
  const auto a = run(SimState{4, 2, 0.0}, params, StopRule{3.0, 5000}, 99, opts);
  const auto b = run(SimState{4, 2, 0.0}, params, StopRule{3.0, 5000}, 99, opts);
  CHECK(a.events == b.events);
  CHECK(a.terminal == b.terminal);
  const auto c = run(SimState{4, 2, 0.0}, params, StopRule{3.0, 5000}, 100, opts);
  CHECK_FALSE(a.events == c.events);
}

TEST_CASE("replay reproduces the terminal counts") {
  const auto params = make({0.2, 0.1, 0.7}, {0.4, 0.3, 0.3}, 0.3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto traj = run(SimState{3, 2, 0.0}, params, StopRule{4.0, 5000}, seed,
                          RunOptions{.record_events = true});
    const auto replayed = replay(traj);
    CHECK(replayed.x == traj.terminal.x);
    CHECK(replayed.y == traj.terminal.y);
  }
}

TEST_CASE("stop rule validation") {
  CHECK_THROWS_AS(StopRule({0.0, 10}).validate(SimState{1, 1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(StopRule({1.0, 1}).validate(SimState{1, 1, 0.0}), std::invalid_argument);
  CHECK_NOTHROW(StopRule({1.0, 2}).validate(SimState{1, 1, 0.0}));
}

TEST_CASE("single-type extinction probability is 1/3") {
  // p = {0.25, 0, 0.75}: s = 0.25 + 0.75 s^2 gives s = 1/3.
  const BranchingProcess bp(1.0, OffspringLaw({0.25, 0.0, 0.75}));
  const std::size_t n = 100000;
  std::size_t extinct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto traj = bp.run(1, StopRule{200.0, 200}, stream_seed(16, i));
    if (traj.terminal.x == 0) ++extinct;
  }
  // Reaching 200 cells leaves a residual extinction chance of 3^-200.
  const auto ci = wilson_interval(extinct, n, 4.0);
  CHECK(ci.low <= 1.0 / 3.0);
  CHECK(ci.high >= 1.0 / 3.0);
}

TEST_CASE("deaths-suppressed law") {
  const auto pi = deaths_suppressed(OffspringLaw({0.25, 0.1, 0.65}));
  CHECK(pi[0] == 0.0);
  CHECK(pi[1] == doctest::Approx(0.35));
  CHECK(pi[2] == doctest::Approx(0.65));

  const auto constant = deaths_suppressed(OffspringLaw({0.4, 0.6}));
  CHECK(constant[1] == 1.0);
  const BranchingProcess bp(1.0, constant);
  Rng rng(17);
  for (int i = 0; i < 100; ++i) CHECK(bp.sample_at(7, 5.0, rng) == 7);
}

TEST_CASE("dominating healthy process never decreases with deaths suppressed") {
  const auto params = make({0.3, 0.2, 0.5}, {0.5, 0.5}, 0.0);
  const BranchingProcess bp(1.0, deaths_suppressed(params.p()));
  const auto traj = bp.run(2, StopRule{5.0, 100000}, 18, RunOptions{.record_events = true});
  SimState s = traj.initial;
  for (const auto& ev : traj.events) {
    const auto next = apply(s, ev);
    CHECK(next.x >= s.x);
    s = next;
  }
}

TEST_CASE("W is at least one") {
  const auto params = make({0.3, 0.2, 0.5}, {0.5, 0.5}, 0.4);
  const AuxSampler aux(params);
  Rng rng(19);
  for (int i = 0; i < 2000; ++i) CHECK(aux.sample(AuxVariable::W, rng) >= 1);
}

TEST_CASE("with Y absent the healthy marginal is the single-type process") {
  const auto params = make({0.3, 0.1, 0.6}, {0.2, 0.8}, 2.0);
  const BranchingProcess bp(1.0, params.p());
  const std::size_t n = 4000;
  std::vector<std::uint64_t> two_type, single;
  const StopRule stop{1.5, 1'000'000};
  for (std::size_t i = 0; i < n; ++i) {
    two_type.push_back(run(SimState{3, 0, 0.0}, params, stop, stream_seed(20, i)).terminal.x);
    single.push_back(bp.run(3, stop, stream_seed(21, i)).terminal.x);
  }
  CHECK(ks_statistic(two_type, single) <= ks_critical(n, n, 0.001));
}

TEST_CASE("lysis events arrive at rate p0 + lambda per infected cell") {
  const auto params = make({0.3, 0.1, 0.6}, {1.0}, 0.7);
  // Gamma = delta_0 makes every lysis a pure death, so y follows a linear
  // birth-death chain and the lysis count over [0, T] with y ~ 1 is checked
  // through the total time-integral of y.
  const std::size_t n = 2000;
  double exposure = 0.0;
  std::size_t lysis = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto traj = run(SimState{0, 1, 0.0}, params, StopRule{2.0, 100000}, stream_seed(22, i),
                          RunOptions{.record_events = true});
    SimState s = traj.initial;
    double last = 0.0;
    for (const auto& ev : traj.events) {
      exposure += static_cast<double>(s.y) * (ev.time - last);
      last = ev.time;
      if (ev.kind == EventKind::Lysis) ++lysis;
      s = apply(s, ev);
    }
    exposure += static_cast<double>(s.y) * (traj.terminal.t - last);
  }
  const double rate = static_cast<double>(lysis) / exposure;
  CHECK(rate == doctest::Approx(1.0).epsilon(5.0 / std::sqrt(static_cast<double>(lysis))));
}

TEST_CASE("xi success probability variants") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  CHECK(xi_success_probability(params, XiVariant::LemmaStatement) ==
        doctest::Approx(1.0 - std::exp(-0.5 * 1.25)));
  CHECK(xi_success_probability(params, XiVariant::ProofBody) ==
        doctest::Approx(1.0 - std::exp(-0.25 * 0.5 * 2.0)));
  const AuxSampler aux(params);
  Rng rng(23);
  for (int i = 0; i < 200; ++i) CHECK(aux.sample(AuxVariable::Xi, rng) <= 1);
}

TEST_CASE("aux batches are reproducible") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  const auto a = sample_aux_batch(AuxVariable::U, params, 100, 24);
  const auto b = sample_aux_batch(AuxVariable::U, params, 100, 24);
  CHECK(a == b);
  CHECK(a[5] == sample_aux(AuxVariable::U, params, stream_seed(24, 5)));
}

TEST_CASE("checkpoints record the state at each requested time") {
  const auto params = make({0.2, 0.1, 0.7}, {0.4, 0.6}, 0.3);
  const auto traj = run(SimState{4, 2, 0.0}, params, StopRule{3.0, 100000}, 25,
                        RunOptions{.record_events = true, .checkpoints = {0.5, 1.0, 2.0}});
  REQUIRE(traj.checkpoints.size() == 3);
  SimState s = traj.initial;
  std::size_t next = 0;
  const std::vector<double> times{0.5, 1.0, 2.0};
  for (const auto& ev : traj.events) {
    while (next < times.size() && ev.time > times[next]) {
      CHECK(traj.checkpoints[next].x == s.x);
      CHECK(traj.checkpoints[next].y == s.y);
      ++next;
    }
    s = apply(s, ev);
  }
}

TEST_CASE("jsonl round trip") {
  const auto params = make({0.2, 0.1, 0.7}, {0.4, 0.3, 0.3}, 0.3);
  const auto traj = run(SimState{3, 2, 0.0}, params, StopRule{2.0, 5000}, 26,
                        RunOptions{.record_events = true});
  std::stringstream buf;
  write_jsonl(buf, traj);
  const auto events = read_jsonl(buf);
  REQUIRE(events.size() == traj.events.size());
  SimState s = traj.initial;
  for (std::size_t i = 0; i < events.size(); ++i) {
    s = apply(s, traj.events[i]);
    CHECK(events[i].t == traj.events[i].time);
    CHECK(events[i].k_or_gamma == traj.events[i].k);
    CHECK(events[i].x_after == s.x);
    CHECK(events[i].y_after == s.y);
  }

  std::stringstream bad("{\"t\": 1.0}\nnot json\n");
  CHECK_THROWS_AS(read_jsonl(bad), std::runtime_error);
}

TEST_CASE("rate overflow is reported") {
  const auto params = make({0.25, 0.0, 0.75}, {0.5, 0.5}, 1.0);
  CHECK_THROWS_AS(total_rate(SimState{std::uint64_t{1} << 62, 0, 0.0}, params), RateOverflow);
}
