#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/core/error.hpp"

namespace robostack::hallway {

// Corridor coordinates: x runs along the hallway (robot starts at x = 0 and
// drives toward +x, the human starts at x = length), y across it from 0 to
// width. The robot's left is +y; the human's left is -y.

struct CorridorSpec {
  double length = 17.5;
  double width = 1.85;
  double turn_distance = 2.75;  // along-corridor separation that commits the turn
  double stop_distance = 1.0;   // Euclidean separation that halts the robot
  double dt = 0.05;
  double robot_speed = 0.6;
  double human_speed = 1.2;
  double robot_lateral_speed = 0.5;
  double human_lateral_speed = 0.8;
  double robot_half_width = 0.25;
  double human_half_width = 0.2;
  double robot_turn_lane = 1.55;  // lateral target after turning left
  double human_left_lane = 0.25;
  double human_right_lane = 1.6;
  double intuition_distance = 4.0;  // separation at which an uninformed human picks a side
  double signal_onset = 5.0;        // separation at which the turn signal switches on
  double max_time = 120.0;

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidSpec(m); };
    if (!(length > 0) || !(width > 0)) fail("corridor dimensions must be positive");
    if (!(stop_distance > 0 && stop_distance < turn_distance && turn_distance < length))
      fail("require 0 < stop distance < turn distance < length");
    if (!(dt > 0)) fail("time step must be positive");
    if (!(robot_speed > 0) || !(human_speed > 0) || !(robot_lateral_speed > 0) || !(human_lateral_speed > 0))
      fail("speeds must be positive");
    for (double y : {robot_turn_lane, human_left_lane, human_right_lane})
      if (!(y > 0 && y < width)) fail("lane targets must lie inside the corridor");
    if (!(intuition_distance > 0) || !(signal_onset > 0) || !(max_time > 0)) fail("distances and horizon must be positive");
  }

  nlohmann::json to_json() const {
    return {{"length", length},          {"width", width},           {"turn_distance", turn_distance},
            {"stop_distance", stop_distance}, {"dt", dt},           {"robot_speed", robot_speed},
            {"human_speed", human_speed}};
  }
};

enum class SignalPolicy { None, TurnSignal, TurnSignalWithDemo };

inline const char* to_string(SignalPolicy p) {
  switch (p) {
    case SignalPolicy::None: return "none";
    case SignalPolicy::TurnSignal: return "turn_signal";
    case SignalPolicy::TurnSignalWithDemo: return "turn_signal_with_passive_demo";
  }
  return "?";
}

/// Accepts both the long names and the CLI short forms.
inline SignalPolicy policy_from_string(const std::string& s) {
  if (s == "none") return SignalPolicy::None;
  if (s == "signal" || s == "turn_signal") return SignalPolicy::TurnSignal;
  if (s == "signal+demo" || s == "turn_signal_with_passive_demo") return SignalPolicy::TurnSignalWithDemo;
  throw InvalidSpec("unknown signal policy '" + s + "'");
}

enum class Side { Left, Right };
enum class Scripted { None, HugLeft };

struct HumanModel {
  Side baseline = Side::Right;
  double p_comply = 0.0;  // probability of reading the signal correctly
  double latency = 0.5;   // seconds from signal onset to reaction
  Scripted script = Scripted::None;

  void validate() const {
    if (!(p_comply >= 0 && p_comply <= 1)) throw InvalidSpec("p_comply must lie in [0, 1]");
    if (!(latency >= 0)) throw InvalidSpec("latency must be non-negative");
  }
};

enum class Cause { None, RobotFullStop, HumanCrossed };

inline const char* to_string(Cause c) {
  switch (c) {
    case Cause::None: return "none";
    case Cause::RobotFullStop: return "robot_full_stop";
    case Cause::HumanCrossed: return "human_crossed_into_robot_path";
  }
  return "?";
}

struct Sample {
  double t = 0;
  double robot_x = 0, robot_y = 0;
  double human_x = 0, human_y = 0;
  bool turned = false;   // robot has committed its turn
  bool stopped = false;  // robot has fired the full-stop rule

  bool operator==(const Sample&) const = default;
};

struct TrialOutcome {
  bool conflict = false;
  Cause cause = Cause::None;
  double min_separation = 0;
  std::optional<std::size_t> turn_tick;
  std::optional<std::size_t> stop_tick;
  std::size_t ticks = 0;
  bool complied = false;
  double duration = 0;
  std::vector<Sample> trajectory;  // filled when requested

  bool operator==(const TrialOutcome&) const = default;
};

inline double euclidean(const Sample& s) { return std::hypot(s.human_x - s.robot_x, s.human_y - s.robot_y); }

/// Classifies a complete trajectory pair. A full stop dominates; otherwise a
/// human footprint entering the robot's committed lane while the two are
/// closer than the turn distance and still approaching counts as crossing.
inline bool in_robot_path(const Sample& s, const CorridorSpec& spec) {
  if (!s.turned || s.stopped) return false;
  const double along = s.human_x - s.robot_x;
  if (along <= 0 || along >= spec.turn_distance) return false;
  return s.human_y + spec.human_half_width > spec.width / 2.0 && s.human_y - spec.human_half_width < spec.width;
}

inline Cause detect_conflict(const std::vector<Sample>& trajectory, const CorridorSpec& spec) {
  for (const auto& s : trajectory)
    if (s.stopped) return Cause::RobotFullStop;
  for (const auto& s : trajectory)
    if (in_robot_path(s, spec)) return Cause::HumanCrossed;
  return Cause::None;
}

namespace detail {

inline double approach(double v, double target, double step) {
  if (std::abs(target - v) <= step) return target;
  return v + (target > v ? step : -step);
}

}  // namespace detail

struct TrialOptions {
  bool record_trajectory = false;
};

/// Uniform draw deciding compliance for trial `index` of a batch seeded with
/// `seed`. Shared across policies and p_comply values so batches are coupled.
inline double compliance_draw(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline TrialOutcome simulate(const CorridorSpec& spec, SignalPolicy policy, const HumanModel& human, double u,
                             const TrialOptions& opts = {}) {
  spec.validate();
  human.validate();
  const bool complies = u < human.p_comply;

  Sample s;
  s.robot_x = 0;
  s.robot_y = spec.width / 2.0;
  s.human_x = spec.length;
  s.human_y = human.script == Scripted::HugLeft ? spec.human_left_lane : spec.width / 2.0;

  std::optional<double> perceived_at;  // time the human registers the signal
  if (policy == SignalPolicy::TurnSignalWithDemo) perceived_at = 0.0;
  std::optional<double> human_target;
  if (human.script == Scripted::HugLeft) human_target = spec.human_left_lane;
  const double intuitive = human.baseline == Side::Right ? spec.human_right_lane : spec.human_left_lane;

  TrialOutcome out;
  out.complied = complies;
  out.min_separation = euclidean(s);
  if (opts.record_trajectory) out.trajectory.push_back(s);

  std::size_t tick = 0;
  bool passed = false;
  bool crossed = false;
  while (s.t < spec.max_time && !passed) {
    ++tick;
    const double along = s.human_x - s.robot_x;

    // robot
    if (!s.stopped) {
      if (!s.turned && along <= spec.turn_distance) {
        s.turned = true;
        out.turn_tick = tick;
      }
      if (!perceived_at && policy == SignalPolicy::TurnSignal && along <= spec.signal_onset)
        perceived_at = s.t + human.latency;
    }

    // human side choice
    if (human.script == Scripted::None) {
      if (perceived_at && s.t >= *perceived_at && complies) {
        human_target = spec.human_left_lane;
      } else if (!human_target && along <= spec.intuition_distance) {
        human_target = intuitive;
      }
      if (s.stopped) human_target = spec.human_left_lane;  // sidestep the halted robot
    }

    // motion
    Sample next = s;
    next.t = s.t + spec.dt;
    if (!s.stopped) {
      next.robot_x += spec.robot_speed * spec.dt;
      if (s.turned) next.robot_y = detail::approach(s.robot_y, spec.robot_turn_lane, spec.robot_lateral_speed * spec.dt);
    }
    if (human_target) next.human_y = detail::approach(s.human_y, *human_target, spec.human_lateral_speed * spec.dt);
    const bool blocked = s.stopped && along > 0 &&
                         next.human_y + spec.human_half_width > s.robot_y - spec.robot_half_width &&
                         next.human_y - spec.human_half_width < s.robot_y + spec.robot_half_width;
    if (!blocked) next.human_x -= spec.human_speed * spec.dt;

    if (!next.stopped && euclidean(next) <= spec.stop_distance && next.human_x > next.robot_x) {
      next.stopped = true;
      out.stop_tick = tick;
    }
    s = next;
    out.min_separation = std::min(out.min_separation, euclidean(s));
    crossed = crossed || in_robot_path(s, spec);
    if (opts.record_trajectory) out.trajectory.push_back(s);
    passed = s.human_x <= 0 || s.human_x < s.robot_x - spec.turn_distance;
  }
  out.ticks = tick;
  out.duration = s.t;

  // same rule detect_conflict applies to a logged trajectory
  out.cause = out.stop_tick ? Cause::RobotFullStop : crossed ? Cause::HumanCrossed : Cause::None;
  out.conflict = out.cause != Cause::None;
  return out;
}

/// One seeded trial; `index` selects the trial within a batch.
inline TrialOutcome run_trial(const CorridorSpec& spec, SignalPolicy policy, const HumanModel& human,
                              std::uint64_t seed, std::uint64_t index = 0, const TrialOptions& opts = {}) {
  return simulate(spec, policy, human, compliance_draw(seed, index), opts);
}

struct Interval {
  double lo = 0, hi = 0;
};

inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959964) {
  if (n == 0) return {0, 1};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  // the bounds at p = 0 and p = 1 are exact; keep rounding from moving them
  return {successes == 0 ? 0.0 : std::max(0.0, center - half), successes == n ? 1.0 : std::min(1.0, center + half)};
}

struct BatchReport {
  CorridorSpec spec;
  SignalPolicy policy = SignalPolicy::None;
  HumanModel human;
  std::size_t n = 0;
  std::size_t conflicts = 0;
  double rate = 0;
  Interval ci95;
  std::map<std::string, std::size_t> causes;

  nlohmann::json to_json() const {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [k, v] : causes) c[k] = v;
    return {{"spec", spec.to_json()},
            {"policy", to_string(policy)},
            {"p_comply", human.p_comply},
            {"n", n},
            {"conflicts", conflicts},
            {"rate", rate},
            {"ci95", {ci95.lo, ci95.hi}},
            {"causes", c}};
  }
};

using TrialObserver = std::function<void(std::size_t index, const TrialOutcome&)>;

inline BatchReport run_batch(const CorridorSpec& spec, SignalPolicy policy, const HumanModel& human, std::size_t n,
                             std::uint64_t seed, const TrialOptions& opts = {}, const TrialObserver& observer = {}) {
  if (n == 0) throw InvalidSpec("batch size must be at least 1");
  BatchReport r{spec, policy, human, n, 0, 0, {}, {}};
  for (Cause c : {Cause::None, Cause::RobotFullStop, Cause::HumanCrossed}) r.causes[to_string(c)] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto o = run_trial(spec, policy, human, seed, i, opts);
    ++r.causes[to_string(o.cause)];
    if (o.conflict) ++r.conflicts;
    if (observer) observer(i, o);
  }
  r.rate = static_cast<double>(r.conflicts) / static_cast<double>(n);
  r.ci95 = wilson_interval(r.conflicts, n);
  return r;
}

}  // namespace robostack::hallway
