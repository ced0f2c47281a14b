#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "robostack/planner/state.hpp"

namespace robostack::executor {

using kb::EntityId;
using planner::Action;
using planner::ActionKind;

enum class SkillStatus { Succeeded, Failed, Preempted };

inline const char* to_string(SkillStatus s) {
  switch (s) {
    case SkillStatus::Succeeded: return "succeeded";
    case SkillStatus::Failed: return "failed";
    case SkillStatus::Preempted: return "preempted";
  }
  return "?";
}

/// What a skill learned about the world beyond its symbolic effects.
struct Observation {
  std::optional<std::pair<EntityId, EntityId>> revealed;  // searched-for id -> found instance
  std::map<EntityId, EntityId> relocated;                 // entity -> new location

  bool empty() const { return !revealed && relocated.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (revealed) j["revealed"] = {{"target", revealed->first}, {"instance", revealed->second}};
    if (!relocated.empty()) j["relocated"] = relocated;
    return j;
  }

  static Observation from_json(const nlohmann::json& j) {
    Observation o;
    if (j.contains("revealed"))
      o.revealed = {j["revealed"]["target"].get<std::string>(), j["revealed"]["instance"].get<std::string>()};
    if (j.contains("relocated")) o.relocated = j["relocated"].get<std::map<std::string, std::string>>();
    return o;
  }
};

struct SkillOutcome {
  SkillStatus status = SkillStatus::Succeeded;
  std::string error;  // failure class when status == Failed
  Observation observed;
  std::uint64_t ticks = 0;

  std::string str() const { return status == SkillStatus::Failed ? "failed(" + error + ")" : to_string(status); }

  static SkillOutcome failed(std::string error, std::uint64_t ticks = 0) {
    return {SkillStatus::Failed, std::move(error), {}, ticks};
  }
};

/// Low-level behaviours the executor dispatches to. `run` blocks until the
/// skill ends and must return Preempted within one tick of a stop request.
class SkillSet {
 public:
  virtual ~SkillSet() = default;
  virtual bool provides(ActionKind kind) const = 0;
  virtual SkillOutcome run(const Action& action, std::stop_token stop) = 0;
  virtual double tick_seconds() const { return 0.01; }
};

}  // namespace robostack::executor
