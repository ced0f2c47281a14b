#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robostack/core/distance_table.hpp"
#include "robostack/core/error.hpp"
#include "robostack/kb/knowledge_base.hpp"

namespace robostack::planner {

using kb::EntityId;
using kb::Triple;

/// Placeholder in goal triples bound to the object of the committed hypothesis.
inline const std::string kObjectVar = "?object";

// Planner-only predicates that never enter the knowledge base.
inline const std::string kHand = "hand";
inline const std::string kEmpty = "empty";
inline const std::string kUnverified = "unverified";
inline const std::string kTold = "told";
inline const std::string kFollowed = "followed";
inline const std::string kFound = "found";

/// Symbolic world state as a set of ground facts:
///   (robot, at, L) (robot, hand, empty) (robot, holds, E) (E, at, L)
///   (P, at, L) (E, delivered-to, P) (E, unverified, yes) (P, told, phrase)
///   (robot, followed, P)
struct State {
  std::set<Triple> facts;

  auto operator<=>(const State&) const = default;
  bool operator==(const State&) const = default;

  bool has(const Triple& t) const { return facts.count(t) > 0; }

  std::optional<EntityId> location_of(const EntityId& e) const {
    auto it = facts.lower_bound(Triple{e, "at", ""});
    if (it != facts.end() && it->subject == e && it->predicate == "at") return it->object;
    return std::nullopt;
  }

  EntityId robot_location() const {
    auto l = location_of(kb::kRobot);
    if (!l) throw NotApplicable("state has no robot location");
    return *l;
  }

  std::optional<EntityId> holding() const {
    auto it = facts.lower_bound(Triple{kb::kRobot, "holds", ""});
    if (it != facts.end() && it->subject == kb::kRobot && it->predicate == "holds") return it->object;
    return std::nullopt;
  }

  bool unverified(const EntityId& e) const { return has({e, kUnverified, "yes"}); }

  void set_location(const EntityId& e, const EntityId& loc) {
    if (auto old = location_of(e)) facts.erase({e, "at", *old});
    facts.insert({e, "at", loc});
  }

  std::string str() const {
    std::string out;
    for (const auto& f : facts) out += f.str() + "\n";
    return out;
  }
};

/// Static facts the planner needs beyond the state.
struct Domain {
  DistanceTable distances;
  std::vector<EntityId> locations;         // sorted
  std::map<EntityId, EntityId> room_of;    // location -> room
  std::set<EntityId> people;
  std::set<EntityId> objects;
  std::set<std::string> phrases;
  std::set<EntityId> guidable;  // people whose location the goal constrains

  double distance(const EntityId& a, const EntityId& b) const { return distances(a, b); }

  std::vector<EntityId> locations_in(const EntityId& room) const {
    std::vector<EntityId> out;
    for (const auto& l : locations)
      if (auto it = room_of.find(l); it != room_of.end() && it->second == room) out.push_back(l);
    return out;
  }

  static Domain from_kb(const kb::KnowledgeBase& base) {
    if (!base.distances()) throw NoPlan("knowledge base carries no distance table");
    Domain d;
    d.distances = *base.distances();
    for (const auto& e : base.entities_of_class("location")) {
      d.locations.push_back(e.id);
      if (auto r = base.room_of(e.id)) d.room_of[e.id] = *r;
    }
    for (const auto& e : base.entities_of_class("person")) d.people.insert(e.id);
    for (const auto& e : base.entities_of_class("object")) d.objects.insert(e.id);
    return d;
  }
};

/// Initial planning state from the non-hypothetical facts in `base`.
inline State initial_state(const kb::KnowledgeBase& base) {
  State s;
  auto robot_at = base.location_of(kb::kRobot, false);
  if (!robot_at) throw NoPlan("robot location unknown");
  s.facts.insert({kb::kRobot, "at", *robot_at});
  auto held = base.objects({kb::kRobot, "holds", std::nullopt});
  if (held.empty())
    s.facts.insert({kb::kRobot, kHand, kEmpty});
  else
    s.facts.insert({kb::kRobot, "holds", held.front()});
  for (const auto& e : base.entities_of_class("object"))
    if (auto l = base.location_of(e.id, false)) s.facts.insert({e.id, "at", *l});
  for (const auto& e : base.entities_of_class("person"))
    if (auto l = base.location_of(e.id, false)) s.facts.insert({e.id, "at", *l});
  for (const auto& t : base.query({std::nullopt, "delivered-to", std::nullopt})) s.facts.insert(t);
  return s;
}

enum class ActionKind { Navigate, Find, Pick, Place, Handover, Follow, Guide, Say };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Navigate: return "navigate";
    case ActionKind::Find: return "find";
    case ActionKind::Pick: return "pick";
    case ActionKind::Place: return "place";
    case ActionKind::Handover: return "handover";
    case ActionKind::Follow: return "follow";
    case ActionKind::Guide: return "guide";
    case ActionKind::Say: return "say";
  }
  return "?";
}

inline std::optional<ActionKind> action_kind_from_string(const std::string& s) {
  for (auto k : {ActionKind::Navigate, ActionKind::Find, ActionKind::Pick, ActionKind::Place, ActionKind::Handover,
                 ActionKind::Follow, ActionKind::Guide, ActionKind::Say})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

/// Fully grounded action: navigate(loc) find(obj,loc) pick(obj)
/// place(obj,loc) handover(obj,person) follow(person) guide(person,loc)
/// say(person,phrase).
struct Action {
  ActionKind kind;
  std::vector<std::string> args;

  auto operator<=>(const Action&) const = default;
  bool operator==(const Action&) const = default;

  std::string str() const {
    std::string out = to_string(kind);
    out += "(";
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? "," : "") + args[i];
    return out + ")";
  }

  /// Inverse of str().
  static Action parse(const std::string& text) {
    auto open = text.find('(');
    if (open == std::string::npos || text.back() != ')') throw NotApplicable("malformed action '" + text + "'");
    auto kind = action_kind_from_string(text.substr(0, open));
    if (!kind) throw NotApplicable("unknown action '" + text + "'");
    Action a{*kind, {}};
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::size_t start = 0;
    const std::size_t arity = (*kind == ActionKind::Navigate || *kind == ActionKind::Pick ||
                               *kind == ActionKind::Follow) ? 1 : 2;
    if (arity == 1) {
      a.args.push_back(inner);
    } else {
      auto comma = inner.find(',', start);
      if (comma == std::string::npos) throw NotApplicable("malformed action '" + text + "'");
      a.args.push_back(inner.substr(0, comma));
      a.args.push_back(inner.substr(comma + 1));
    }
    return a;
  }
};

struct Effects {
  std::vector<Triple> add;
  std::vector<Triple> del;
  double cost = 0.0;
};

/// Preconditions of `a` checked against `s`; the add/delete lists and cost
/// when they hold.
inline std::optional<Effects> ground(const Action& a, const State& s, const Domain& d) {
  const auto here = s.location_of(kb::kRobot);
  if (!here) return std::nullopt;
  const auto& r = kb::kRobot;
  auto arg = [&](std::size_t i) -> const std::string& { return a.args.at(i); };
  auto expect = [&](std::size_t n) { return a.args.size() == n; };
  switch (a.kind) {
    case ActionKind::Navigate: {
      if (!expect(1) || arg(0) == *here || !d.distances.contains(arg(0))) return std::nullopt;
      return Effects{{{r, "at", arg(0)}}, {{r, "at", *here}}, d.distance(*here, arg(0))};
    }
    case ActionKind::Find: {
      if (!expect(2) || arg(1) != *here || !s.has({arg(0), "at", arg(1)}) || !s.unverified(arg(0)))
        return std::nullopt;
      return Effects{{}, {{arg(0), kUnverified, "yes"}}, 1.0};
    }
    case ActionKind::Pick: {
      if (!expect(1) || !s.has({arg(0), "at", *here}) || s.unverified(arg(0)) || !s.has({r, kHand, kEmpty}) ||
          d.people.count(arg(0)))
        return std::nullopt;
      return Effects{{{r, "holds", arg(0)}}, {{arg(0), "at", *here}, {r, kHand, kEmpty}}, 1.0};
    }
    case ActionKind::Place: {
      if (!expect(2) || arg(1) != *here || !s.has({r, "holds", arg(0)})) return std::nullopt;
      return Effects{{{arg(0), "at", *here}, {r, kHand, kEmpty}}, {{r, "holds", arg(0)}}, 1.0};
    }
    case ActionKind::Handover: {
      if (!expect(2) || !s.has({r, "holds", arg(0)}) || !d.people.count(arg(1)) || !s.has({arg(1), "at", *here}))
        return std::nullopt;
      return Effects{{{arg(0), "delivered-to", arg(1)}, {r, kHand, kEmpty}}, {{r, "holds", arg(0)}}, 1.0};
    }
    case ActionKind::Follow: {
      if (!expect(1) || !d.people.count(arg(0)) || !s.has({arg(0), "at", *here}) || s.has({r, kFollowed, arg(0)}))
        return std::nullopt;
      return Effects{{{r, kFollowed, arg(0)}}, {}, 1.0};
    }
    case ActionKind::Guide: {
      if (!expect(2) || !d.guidable.count(arg(0)) || !s.has({arg(0), "at", *here}) || arg(1) == *here ||
          !d.distances.contains(arg(1)))
        return std::nullopt;
      return Effects{{{r, "at", arg(1)}, {arg(0), "at", arg(1)}},
                     {{r, "at", *here}, {arg(0), "at", *here}},
                     d.distance(*here, arg(1))};
    }
    case ActionKind::Say: {
      if (!expect(2) || !d.people.count(arg(0)) || !s.has({arg(0), "at", *here}) || s.has({arg(0), kTold, arg(1)}))
        return std::nullopt;
      return Effects{{{arg(0), kTold, arg(1)}}, {}, 1.0};
    }
  }
  return std::nullopt;
}

inline bool applicable(const Action& a, const State& s, const Domain& d) { return ground(a, s, d).has_value(); }

inline State apply(const Action& a, const State& s, const Domain& d) {
  auto eff = ground(a, s, d);
  if (!eff) throw NotApplicable(a.str() + " is not applicable");
  State next = s;
  for (const auto& t : eff->del) next.facts.erase(t);
  for (const auto& t : eff->add) next.facts.insert(t);
  return next;
}

inline double action_cost(const Action& a, const State& s, const Domain& d) {
  auto eff = ground(a, s, d);
  if (!eff) throw NotApplicable(a.str() + " is not applicable");
  return eff->cost;
}

/// Every action applicable in `s`, sorted by their printed form.
inline std::vector<std::pair<Action, Effects>> successors(const State& s, const Domain& d) {
  std::vector<Action> candidates;
  const auto here = s.robot_location();
  for (const auto& l : d.locations) candidates.push_back({ActionKind::Navigate, {l}});
  for (auto it = s.facts.begin(); it != s.facts.end(); ++it) {
    const auto& f = *it;
    if (f.predicate == "at" && f.object == here && f.subject != kb::kRobot) {
      if (d.people.count(f.subject)) {
        candidates.push_back({ActionKind::Follow, {f.subject}});
        if (d.guidable.count(f.subject))
          for (const auto& l : d.locations) candidates.push_back({ActionKind::Guide, {f.subject, l}});
        for (const auto& p : d.phrases) candidates.push_back({ActionKind::Say, {f.subject, p}});
      } else {
        candidates.push_back({ActionKind::Find, {f.subject, here}});
        candidates.push_back({ActionKind::Pick, {f.subject}});
      }
    }
  }
  if (auto held = s.holding()) {
    candidates.push_back({ActionKind::Place, {*held, here}});
    for (const auto& p : d.people) candidates.push_back({ActionKind::Handover, {*held, p}});
  }
  std::vector<std::pair<Action, Effects>> out;
  for (auto& a : candidates)
    if (auto eff = ground(a, s, d)) out.emplace_back(std::move(a), std::move(*eff));
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first.str() < y.first.str(); });
  return out;
}

/// Conjunction of target triples. Targets may use `kObjectVar`, bound to the
/// object of one of `assumption`'s open hypotheses.
struct Goal {
  std::vector<Triple> targets;
  std::optional<std::string> assumption;

  bool operator==(const Goal&) const = default;

  bool references_object_var() const {
    return std::any_of(targets.begin(), targets.end(),
                       [](const Triple& t) { return t.subject == kObjectVar || t.object == kObjectVar; });
  }

  Goal bind(const EntityId& object) const {
    Goal g = *this;
    for (auto& t : g.targets) {
      if (t.subject == kObjectVar) t.subject = object;
      if (t.object == kObjectVar) t.object = object;
    }
    return g;
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) out += (i ? " & " : "") + targets[i].str();
    return out;
  }
};

inline bool target_satisfied(const Triple& t, const State& s, const Domain& d) {
  if (t.predicate == "in-room") {
    auto loc = s.location_of(t.subject);
    if (!loc) return false;
    auto it = d.room_of.find(*loc);
    return it != d.room_of.end() && it->second == t.object;
  }
  if (t.predicate == "near") {
    auto a = s.location_of(t.subject), b = s.location_of(t.object);
    return a && b && *a == *b;
  }
  if (t.predicate == kFound) {
    if (s.unverified(t.subject)) return false;
    if (s.has({kb::kRobot, "holds", t.subject})) return true;
    auto loc = s.location_of(t.subject);
    return loc && *loc == s.robot_location();
  }
  return s.has(t);
}

inline bool satisfied(const Goal& g, const State& s, const Domain& d) {
  return std::all_of(g.targets.begin(), g.targets.end(), [&](const Triple& t) { return target_satisfied(t, s, d); });
}

}  // namespace robostack::planner
