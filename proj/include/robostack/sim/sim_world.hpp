#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "robostack/executor/skills.hpp"
#include "robostack/kb/knowledge_base.hpp"
#include "robostack/sim/world.hpp"

namespace robostack::sim {

using executor::Observation;
using executor::SkillOutcome;
using executor::SkillStatus;
using planner::Action;
using planner::ActionKind;

// Durations in ticks for skills that do not travel.
struct SkillDurations {
  std::uint64_t find = 100;
  std::uint64_t manipulate = 50;
  std::uint64_t say = 20;
};

// Deterministic ground-truth world. Every skill runs tick by tick under one
// lock, so concurrent submissions are applied in arrival order.
class SimWorld : public executor::SkillSet {
 public:
  using TickHook = std::function<void(std::uint64_t tick)>;

  SimWorld(WorldSpec spec, kb::KnowledgeBase& base) : spec_(std::move(spec)), kb_(base), rng_(spec_.seed) {
    robot_ = spec_.robot_start;
    for (const auto& o : spec_.objects) {
      objects_[o.id] = o.true_location;
      classes_[o.id] = o.cls;
    }
    for (const auto& p : spec_.people) {
      people_[p.name] = p.waypoints.front();
      waypoint_index_[p.name] = 0;
    }
  }

  const WorldSpec& spec() const { return spec_; }

  bool provides(ActionKind) const override { return true; }
  double tick_seconds() const override { return spec_.tick_seconds; }

  void set_tick_hook(TickHook hook) {
    std::lock_guard lock(mu_);
    hook_ = std::move(hook);
  }

  SkillDurations& durations() { return durations_; }

  SkillOutcome run(const Action& a, std::stop_token stop) override {
    std::lock_guard lock(mu_);
    auto arg = [&](std::size_t i) -> const std::string& { return a.args.at(i); };
    try {
      if (auto miss = draw_failure(planner::to_string(a.kind))) return *miss;
      switch (a.kind) {
        case ActionKind::Navigate: return navigate(arg(0), stop);
        case ActionKind::Find: return find_target(arg(0), arg(1), stop);
        case ActionKind::Pick: return pick(arg(0), stop);
        case ActionKind::Place: return place(arg(0), arg(1), stop);
        case ActionKind::Handover: return handover(arg(0), arg(1), stop);
        case ActionKind::Follow: return follow(arg(0), stop);
        case ActionKind::Guide: return guide(arg(0), arg(1), stop);
        case ActionKind::Say: return say(arg(0), arg(1), stop);
      }
    } catch (const NotAtLocation&) {
      return SkillOutcome::failed("not-at-location");
    } catch (const std::out_of_range&) {
      return SkillOutcome::failed("bad-arguments");
    }
    return SkillOutcome::failed("unknown-skill");
  }

  // ---- individual skills -------------------------------------------------

  SkillOutcome skill_navigate(const EntityId& loc, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return navigate(loc, stop);
  }

  /// Looks for an object of class `cls` at `loc`. Throws NotAtLocation when
  /// the robot is elsewhere.
  SkillOutcome skill_find(const std::string& cls, const EntityId& loc, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return find(cls, loc, std::nullopt, stop);
  }

  SkillOutcome skill_pick(const EntityId& obj, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return pick(obj, stop);
  }
  SkillOutcome skill_place(const EntityId& obj, const EntityId& loc, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return place(obj, loc, stop);
  }
  SkillOutcome skill_handover(const EntityId& obj, const EntityId& person, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return handover(obj, person, stop);
  }
  SkillOutcome skill_follow(const EntityId& person, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return follow(person, stop);
  }
  SkillOutcome skill_guide(const EntityId& person, const EntityId& loc, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return guide(person, loc, stop);
  }
  SkillOutcome skill_say(const EntityId& person, const std::string& phrase, std::stop_token stop = {}) {
    std::lock_guard lock(mu_);
    return say(person, phrase, stop);
  }

  // ---- ground truth --------------------------------------------------------

  const EntityId& robot_location() const { return robot_; }
  const std::optional<EntityId>& holding() const { return holding_; }
  std::uint64_t ticks() const { return tick_; }

  std::optional<EntityId> object_location(const EntityId& obj) const {
    auto it = objects_.find(obj);
    return it == objects_.end() ? std::nullopt : std::optional(it->second);
  }
  std::optional<EntityId> possessor(const EntityId& obj) const {
    auto it = possession_.find(obj);
    return it == possession_.end() ? std::nullopt : std::optional(it->second);
  }
  const EntityId& person_location(const EntityId& p) const { return people_.at(p); }
  const std::set<std::pair<EntityId, std::string>>& told() const { return told_; }

  /// Each object is at exactly one of: a location, the robot's hand, a person.
  bool conserved() const {
    for (const auto& o : spec_.objects) {
      int places = objects_.count(o.id) + possession_.count(o.id) + (holding_ == o.id ? 1 : 0);
      if (places != 1) return false;
    }
    return true;
  }

 private:
  // Advances one tick; false when the skill must stop.
  bool tick(const std::stop_token& stop) {
    ++tick_;
    if (hook_) hook_(tick_);
    return !stop.stop_requested();
  }

  // Spends `n` ticks; returns the number completed before a stop request.
  std::uint64_t spend(std::uint64_t n, const std::stop_token& stop, bool& preempted) {
    if (stop.stop_requested()) {
      preempted = true;
      return 0;
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      if (!tick(stop)) {
        preempted = true;
        return i + 1;
      }
    }
    return n;
  }

  std::uint64_t travel_ticks(const EntityId& a, const EntityId& b) const {
    const double d = spec_.distances(a, b);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(d / (spec_.robot_speed * spec_.tick_seconds) - 1e-9)));
  }

  static SkillOutcome preempted(std::uint64_t ticks) { return {SkillStatus::Preempted, "", {}, ticks}; }

  std::optional<SkillOutcome> draw_failure(const std::string& skill) {
    const auto* entry = spec_.outcome_model.find(skill);
    if (!entry || entry->success >= 1.0) return std::nullopt;
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (u < entry->success) return std::nullopt;
    return SkillOutcome::failed(entry->failure, 1);
  }

  void set_kb_location(const EntityId& e, const EntityId& loc) {
    if (kb_.has_entity(e)) kb_.assert_fact({e, "at", loc});
  }

  SkillOutcome navigate(const EntityId& loc, const std::stop_token& stop) {
    if (!spec_.distances.contains(loc)) return SkillOutcome::failed("unknown-location");
    if (loc == robot_) return SkillOutcome::failed("already-there");
    bool pre = false;
    auto done = spend(travel_ticks(robot_, loc), stop, pre);
    if (pre) return preempted(done);
    robot_ = loc;
    set_kb_location(kb::kRobot, loc);
    return {SkillStatus::Succeeded, "", {}, done};
  }

  SkillOutcome find_target(const EntityId& target, const EntityId& loc, const std::stop_token& stop) {
    if (!kb_.has_entity(target)) return SkillOutcome::failed("unknown-object");
    return find(kb_.entity(target).cls, loc, target, stop);
  }

  SkillOutcome find(const std::string& cls, const EntityId& loc, std::optional<EntityId> target,
                    const std::stop_token& stop) {
    if (robot_ != loc) throw NotAtLocation("robot is at " + robot_ + ", not " + loc);
    bool pre = false;
    auto done = spend(durations_.find, stop, pre);
    if (pre) return preempted(done);
    std::optional<EntityId> hit;
    for (const auto& [id, at] : objects_)  // ordered by id
      if (at == loc && kb_.ontology().is_a(classes_.at(id), cls)) {
        hit = id;
        break;
      }
    if (!hit) return SkillOutcome::failed("not-found", done);
    if (!kb_.has_entity(*hit)) kb_.add_entity(*hit, classes_.at(*hit), kb::Origin::Observed);
    kb_.assert_fact({*hit, "at", loc});
    SkillOutcome out{SkillStatus::Succeeded, "", {}, done};
    out.observed.revealed = {target.value_or(*hit), *hit};
    return out;
  }

  SkillOutcome pick(const EntityId& obj, const std::stop_token& stop) {
    auto it = objects_.find(obj);
    if (it == objects_.end() || !kb_.has_entity(obj)) return SkillOutcome::failed("unknown-object");
    if (holding_) return SkillOutcome::failed("hand-occupied");
    if (it->second != robot_) return SkillOutcome::failed("not-co-located");
    bool pre = false;
    auto done = spend(durations_.manipulate, stop, pre);
    if (pre) return preempted(done);
    kb_.retract_fact({obj, "at", it->second});
    objects_.erase(it);
    holding_ = obj;
    kb_.assert_fact({kb::kRobot, "holds", obj});
    return {SkillStatus::Succeeded, "", {}, done};
  }

  SkillOutcome place(const EntityId& obj, const EntityId& loc, const std::stop_token& stop) {
    if (holding_ != obj) return SkillOutcome::failed("not-holding");
    if (robot_ != loc) return SkillOutcome::failed("not-co-located");
    bool pre = false;
    auto done = spend(durations_.manipulate, stop, pre);
    if (pre) return preempted(done);
    holding_.reset();
    objects_[obj] = loc;
    kb_.retract_fact({kb::kRobot, "holds", obj});
    kb_.assert_fact({obj, "at", loc});
    return {SkillStatus::Succeeded, "", {}, done};
  }

  SkillOutcome handover(const EntityId& obj, const EntityId& person, const std::stop_token& stop) {
    if (holding_ != obj) return SkillOutcome::failed("not-holding");
    auto p = people_.find(person);
    if (p == people_.end()) return SkillOutcome::failed("unknown-person");
    if (p->second != robot_) return SkillOutcome::failed("not-co-located");
    bool pre = false;
    auto done = spend(durations_.manipulate, stop, pre);
    if (pre) return preempted(done);
    holding_.reset();
    possession_[obj] = person;
    kb_.retract_fact({kb::kRobot, "holds", obj});
    kb_.assert_fact({obj, "delivered-to", person});
    return {SkillStatus::Succeeded, "", {}, done};
  }

  SkillOutcome follow(const EntityId& person, const std::stop_token& stop) {
    auto p = people_.find(person);
    if (p == people_.end()) return SkillOutcome::failed("unknown-person");
    if (p->second != robot_) return SkillOutcome::failed("not-co-located");
    const auto& route = person_spec(person).waypoints;
    auto& idx = waypoint_index_[person];
    std::uint64_t total = 0;
    SkillOutcome out{SkillStatus::Succeeded, "", {}, 0};
    while (idx + 1 < route.size()) {
      const auto& next = route[idx + 1];
      bool pre = false;
      total += spend(travel_ticks(robot_, next), stop, pre);
      if (pre) return preempted(total);
      ++idx;
      robot_ = next;
      p->second = next;
      set_kb_location(kb::kRobot, next);
      set_kb_location(person, next);
      out.observed.relocated[kb::kRobot] = next;
      out.observed.relocated[person] = next;
    }
    out.ticks = total;
    return out;
  }

  // Nearest location of `room` from the robot, ties broken by id.
  std::optional<EntityId> nearest_in_room(const EntityId& room) const {
    std::optional<EntityId> best;
    for (const auto& l : spec_.locations) {
      if (l.room != room) continue;
      if (!best || spec_.distances(robot_, l.id) < spec_.distances(robot_, *best)) best = l.id;
    }
    return best;
  }

  SkillOutcome guide(const EntityId& person, const EntityId& target, const std::stop_token& stop) {
    auto p = people_.find(person);
    if (p == people_.end()) return SkillOutcome::failed("unknown-person");
    if (p->second != robot_) return SkillOutcome::failed("not-co-located");
    // a room target resolves to its nearest location; already being there is success
    if (const auto* here = spec_.location(robot_); here && here->room == target)
      return {SkillStatus::Succeeded, "", {}, 0};
    const EntityId loc = spec_.distances.contains(target) ? target : nearest_in_room(target).value_or(target);
    if (!spec_.distances.contains(loc)) return SkillOutcome::failed("unknown-location");
    if (loc == robot_) return SkillOutcome::failed("already-there");
    if (!person_spec(person).compliant) return SkillOutcome::failed("person-lost", 1);
    bool pre = false;
    auto done = spend(travel_ticks(robot_, loc), stop, pre);
    if (pre) return preempted(done);
    robot_ = loc;
    p->second = loc;
    set_kb_location(kb::kRobot, loc);
    set_kb_location(person, loc);
    return {SkillStatus::Succeeded, "", {}, done};
  }

  SkillOutcome say(const EntityId& person, const std::string& phrase, const std::stop_token& stop) {
    auto p = people_.find(person);
    if (p == people_.end()) return SkillOutcome::failed("unknown-person");
    if (p->second != robot_) return SkillOutcome::failed("not-co-located");
    bool pre = false;
    auto done = spend(durations_.say, stop, pre);
    if (pre) return preempted(done);
    told_.insert({person, phrase});
    return {SkillStatus::Succeeded, "", {}, done};
  }

  const PersonSpec& person_spec(const EntityId& name) const {
    for (const auto& p : spec_.people)
      if (p.name == name) return p;
    throw UnknownPerson(name);
  }

  WorldSpec spec_;
  kb::KnowledgeBase& kb_;
  std::mt19937_64 rng_;
  std::mutex mu_;
  TickHook hook_;
  SkillDurations durations_;
  std::uint64_t tick_ = 0;

  EntityId robot_;
  std::optional<EntityId> holding_;
  std::map<EntityId, EntityId> objects_;     // object -> location
  std::map<EntityId, std::string> classes_;  // object -> class
  std::map<EntityId, EntityId> possession_;  // object -> person
  std::map<EntityId, EntityId> people_;      // person -> location
  std::map<EntityId, std::size_t> waypoint_index_;
  std::set<std::pair<EntityId, std::string>> told_;
};

}  // namespace robostack::sim
