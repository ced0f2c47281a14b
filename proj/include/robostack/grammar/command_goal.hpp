#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "robostack/grammar/grammar.hpp"
#include "robostack/kb/knowledge_base.hpp"
#include "robostack/planner/planner.hpp"

namespace robostack::grammar {

using planner::Goal;

namespace detail {

inline void require_room(const kb::KnowledgeBase& base, const std::optional<std::string>& room) {
  if (room && !base.is_room(*room)) throw UnknownRoom("unknown room '" + *room + "'");
}

inline void require_person(const kb::KnowledgeBase& base, const std::optional<std::string>& person) {
  if (person && !base.is_person(*person)) throw UnknownPerson("unknown person '" + *person + "'");
}

// Rooms an unsourced search covers: every room with somewhere to put things.
inline std::vector<std::string> searchable_rooms(const kb::KnowledgeBase& base) {
  std::vector<std::string> out;
  for (const auto& r : base.rooms())
    if (!base.placement_locations(r).empty()) out.push_back(r);
  return out;
}

// Known instance of the descriptor's class inside `scope`, nearest to the robot.
inline std::optional<kb::EntityId> known_instance(const kb::KnowledgeBase& base, const ObjectDescriptor& d,
                                                  const std::vector<std::string>& scope) {
  if (d.known_instance) return base.resolve(*d.known_instance);
  const auto here = base.location_of(kb::kRobot, false);
  std::optional<kb::EntityId> best;
  double best_cost = 0;
  for (const auto& e : base.entities_of_class(d.cls)) {
    if (base.contains({kb::kRobot, "holds", e.id}, false)) return e.id;
    auto loc = base.location_of(e.id, false);
    if (!loc) continue;
    auto room = base.room_of(*loc);
    if (!room || std::find(scope.begin(), scope.end(), *room) == scope.end()) continue;
    const double cost = here && base.distances() && base.distances()->contains(*here) &&
                                base.distances()->contains(*loc)
                            ? (*base.distances())(*here, *loc)
                            : 0.0;
    if (!best || cost < best_cost) {
      best = e.id;
      best_cost = cost;
    }
  }
  return best;
}

}  // namespace detail

/// Goal for an object descriptor: either a known instance or the object
/// variable bound through freshly injected hypotheses.
struct ObjectBinding {
  std::string subject;  // entity id or planner::kObjectVar
  std::optional<std::string> assumption;
  std::vector<kb::Hypothesis> hypotheses;
};

inline ObjectBinding bind_object(const ObjectDescriptor& d, const std::optional<std::string>& source,
                                 kb::KnowledgeBase& base) {
  const auto scope = source ? std::vector<std::string>{*source} : detail::searchable_rooms(base);
  if (auto known = detail::known_instance(base, d, scope)) return {*known, std::nullopt, {}};
  auto hyps = base.inject_hypotheses(d, scope);
  if (hyps.empty()) throw NoPlan("every hypothesis for " + d.cls + " has already been refuted");
  return {planner::kObjectVar, hyps.front().assumption, hyps};
}

/// Translates a parsed command into a planner goal, injecting hypotheses
/// for objects the robot has not seen.
inline Goal frame_to_goal(const CommandFrame& f, kb::KnowledgeBase& base,
                          std::vector<kb::Hypothesis>* injected = nullptr) {
  f.validate();
  detail::require_room(base, f.source);
  detail::require_room(base, f.destination);
  detail::require_person(base, f.person);
  Goal g;
  auto object = [&] {
    auto b = bind_object(*f.object, f.source, base);
    g.assumption = b.assumption;
    if (injected) *injected = b.hypotheses;
    return b.subject;
  };
  switch (f.task) {
    case Task::Bring: g.targets.push_back({object(), "delivered-to", *f.person}); break;
    case Task::Go: g.targets.push_back({kb::kRobot, "in-room", *f.destination}); break;
    case Task::FindObject: g.targets.push_back({object(), planner::kFound, kb::kRobot}); break;
    case Task::FindPerson: g.targets.push_back({kb::kRobot, "near", *f.person}); break;
    case Task::Guide: g.targets.push_back({*f.person, "in-room", *f.destination}); break;
    case Task::Follow: g.targets.push_back({kb::kRobot, planner::kFollowed, *f.person}); break;
    case Task::Say: g.targets.push_back({*f.person, planner::kTold, *f.payload}); break;
    case Task::Store: {
      const auto place = planner::storing_placement(f.object->cls, base);
      g.targets.push_back({object(), "at", place});
      break;
    }
  }
  return g;
}

}  // namespace robostack::grammar
