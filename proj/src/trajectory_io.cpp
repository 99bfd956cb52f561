#include "lysim/trajectory_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace lysim {
namespace {

constexpr const char* kComponentsA[] = {"x_after", "x_hat_after", "y_after", "y_hat_after"};
constexpr const char* kComponentsB[] = {"x_after", "x_prime_after", "x_hat_after", "y_after"};

template <class State>
void write_coupled(std::ostream& out, const CoupledTrajectory<State>& traj,
                   const char* const (&names)[4]) {
  for (const auto& ev : traj.events) {
    nlohmann::ordered_json line;
    line["t"] = ev.time;
    line["row"] = ev.row;
    line["k_or_gamma"] = ev.k;
    for (std::size_t i = 0; i < 4; ++i) line[names[i]] = ev.after[i];
    out << line.dump() << '\n';
  }
}

}  // namespace

void write_jsonl(std::ostream& out, const Trajectory& trajectory) {
  SimState s = trajectory.initial;
  for (const auto& ev : trajectory.events) {
    s = apply(s, ev);
    nlohmann::ordered_json line;
    line["t"] = ev.time;
    line["kind"] = std::string(to_string(ev.kind));
    line["k_or_gamma"] = ev.k;
    line["x_after"] = s.x;
    line["y_after"] = s.y;
    out << line.dump() << '\n';
  }
}

void write_jsonl(std::ostream& out, const CoupledTrajectory<CoupledStateA>& trajectory) {
  write_coupled(out, trajectory, kComponentsA);
}

void write_jsonl(std::ostream& out, const CoupledTrajectory<CoupledStateB>& trajectory) {
  write_coupled(out, trajectory, kComponentsB);
}

std::vector<JsonlEvent> read_jsonl(std::istream& in) {
  std::vector<JsonlEvent> events;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      JsonlEvent ev;
      ev.t = j.at("t").get<double>();
      ev.kind = j.at("kind").get<std::string>();
      ev.k_or_gamma = j.at("k_or_gamma").get<std::uint64_t>();
      ev.x_after = j.at("x_after").get<std::uint64_t>();
      ev.y_after = j.at("y_after").get<std::uint64_t>();
      events.push_back(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace lysim
