#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/kb/knowledge_base.hpp"
#include "robostack/planner/state.hpp"

namespace robostack::planner {

struct Plan {
  std::vector<Action> actions;
  double cost = 0.0;
  std::optional<std::string> committed;  // hypothesis id
  std::optional<EntityId> committed_object;

  std::vector<std::string> action_strings() const {
    std::vector<std::string> out;
    for (const auto& a : actions) out.push_back(a.str());
    return out;
  }

  /// One JSON object per action, with its cost, as newline-separated lines.
  std::string to_json_lines(const State& initial, const Domain& d) const {
    std::string out;
    State s = initial;
    for (const auto& a : actions) {
      const double c = action_cost(a, s, d);
      nlohmann::json line = {{"action", a.str()}, {"cost", c}};
      if (committed) line["hypothesis"] = *committed;
      out += line.dump() + "\n";
      s = apply(a, s, d);
    }
    return out;
  }
};

/// Returned by replanning when the committed assumption has no open
/// hypotheses left.
struct DiagnosisTrigger {
  std::string assumption;
};

struct SearchOptions {
  std::size_t max_expansions = 2'000'000;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower bound on the travel the robot still has to do for one target.
inline double target_bound(const Triple& t, const State& s, const Domain& d) {
  if (target_satisfied(t, s, d)) return 0.0;
  const auto here = s.robot_location();
  auto dist = [&](const EntityId& a, const EntityId& b) { return d.distance(a, b); };
  auto room_bound = [&](const EntityId& from, const EntityId& room) {
    double best = kInf;
    for (const auto& l : d.locations_in(room)) best = std::min(best, dist(from, l));
    return best;
  };
  const bool subject_is_robot = t.subject == kb::kRobot;
  if (subject_is_robot && t.predicate == "at") return dist(here, t.object);
  if (subject_is_robot && t.predicate == "in-room") return room_bound(here, t.object);
  if (subject_is_robot && (t.predicate == "near" || t.predicate == kFollowed)) {
    auto p = s.location_of(t.object);
    return p ? dist(here, *p) : kInf;
  }
  if (d.people.count(t.subject)) {
    auto p = s.location_of(t.subject);
    if (!p) return kInf;
    if (t.predicate == "at") return dist(here, *p) + dist(*p, t.object);
    if (t.predicate == "in-room") return dist(here, *p) + room_bound(*p, t.object);
    return dist(here, *p);  // told
  }
  // object targets
  const bool held = s.has({kb::kRobot, "holds", t.subject});
  auto obj_at = s.location_of(t.subject);
  if (!held && !obj_at) return kInf;  // handed over or unknown
  if (t.predicate == kFound) return held ? 0.0 : dist(here, *obj_at);
  if (t.predicate == "at") return held ? dist(here, t.object) : dist(here, *obj_at) + dist(*obj_at, t.object);
  if (t.predicate == "delivered-to") {
    auto p = s.location_of(t.object);
    if (!p) return kInf;
    if (held) return dist(here, *p);
    return std::min(dist(here, *obj_at) + dist(*obj_at, *p), dist(here, *p) + dist(*p, *obj_at));
  }
  return 0.0;
}

inline double heuristic(const Goal& g, const State& s, const Domain& d) {
  double h = 0.0;
  for (const auto& t : g.targets) h = std::max(h, target_bound(t, s, d));
  return h;
}

struct Node {
  double f;
  double g;
  State state;
  std::vector<Action> path;
  std::vector<std::string> path_keys;
};

struct NodeOrder {
  bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
    if (a->f != b->f) return a->f > b->f;
    if (a->path.size() != b->path.size()) return a->path.size() > b->path.size();
    return a->path_keys > b->path_keys;
  }
};

}  // namespace detail

/// A* over the grounded state space. Least cost first; among equal-cost
/// plans the shortest, then the lexicographically smallest, wins.
inline std::optional<Plan> search(const State& start, const Goal& goal, const Domain& d,
                                  const SearchOptions& opts = {}) {
  using detail::Node;
  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, detail::NodeOrder> open;
  std::set<State> closed;
  const double h0 = detail::heuristic(goal, start, d);
  if (!std::isfinite(h0)) return std::nullopt;
  open.push(std::make_shared<Node>(Node{h0, 0.0, start, {}, {}}));
  std::size_t expansions = 0;
  while (!open.empty()) {
    auto node = open.top();
    open.pop();
    if (closed.count(node->state)) continue;
    if (satisfied(goal, node->state, d)) return Plan{node->path, node->g, std::nullopt, std::nullopt};
    closed.insert(node->state);
    if (++expansions > opts.max_expansions) throw NoPlan("search expansion limit reached");
    for (auto& [action, eff] : successors(node->state, d)) {
      State next = node->state;
      for (const auto& t : eff.del) next.facts.erase(t);
      for (const auto& t : eff.add) next.facts.insert(t);
      if (closed.count(next)) continue;
      const double h = detail::heuristic(goal, next, d);
      if (!std::isfinite(h)) continue;
      auto child = std::make_shared<Node>(Node{node->g + eff.cost + h, node->g + eff.cost, std::move(next),
                                               node->path, node->path_keys});
      child->path.push_back(action);
      child->path_keys.push_back(action.str());
      open.push(std::move(child));
    }
  }
  return std::nullopt;
}

namespace detail {

inline void check_goal_entities(const Goal& g, const kb::KnowledgeBase& base) {
  if (g.targets.empty()) throw NoPlan("empty goal");
  for (const auto& t : g.targets) {
    if (t.subject != kObjectVar && !base.has_entity(t.subject))
      throw UnknownEntity("goal references unknown entity '" + t.subject + "'");
  }
}

// Targets no single state can satisfy together: a functional predicate with
// two values, or a robot location outside the room it must be in.
inline std::optional<std::string> contradiction(const Goal& g, const Domain& d) {
  std::map<std::pair<std::string, std::string>, std::string> value;
  auto functional = [](const std::string& p) { return p == "at" || p == "in-room" || p == "delivered-to"; };
  for (const auto& t : g.targets) {
    if (!functional(t.predicate)) continue;
    auto [it, fresh] = value.emplace(std::make_pair(t.subject, t.predicate), t.object);
    if (!fresh && it->second != t.object) return t.subject + " " + t.predicate + " both " + it->second + " and " + t.object;
  }
  for (const auto& [key, loc] : value) {
    if (key.second != "at") continue;
    auto room = value.find({key.first, "in-room"});
    auto it = d.room_of.find(loc);
    if (room != value.end() && it != d.room_of.end() && it->second != room->second)
      return key.first + " at " + loc + " lies outside " + room->second;
  }
  return std::nullopt;
}

// Candidate plans are ranked by cost, length, action sequence, then hypothesis id.
inline bool better(const Plan& a, const Plan& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.actions.size() != b.actions.size()) return a.actions.size() < b.actions.size();
  auto ka = a.action_strings(), kb_ = b.action_strings();
  if (ka != kb_) return ka < kb_;
  return a.committed.value_or("") < b.committed.value_or("");
}

}  // namespace detail

/// Static domain for planning toward `goal`: phrases come from its `told`
/// targets, and only people whose location it constrains can be guided.
inline Domain domain_for(const Goal& goal, const kb::KnowledgeBase& base) {
  Domain d = Domain::from_kb(base);
  for (const auto& t : goal.targets) {
    if (t.predicate == kTold) d.phrases.insert(t.object);
    if ((t.predicate == "in-room" || t.predicate == "at") && d.people.count(t.subject)) d.guidable.insert(t.subject);
  }
  return d;
}

/// Least-cost plan for `goal` from `s`. A goal tied to an assumption commits
/// to the cheapest of its open hypotheses.
inline Plan plan(const State& s, const Goal& goal, const kb::KnowledgeBase& base, const SearchOptions& opts = {}) {
  detail::check_goal_entities(goal, base);
  Domain d = domain_for(goal, base);

  if (auto why = detail::contradiction(goal, d)) throw NoPlan("goal " + goal.str() + " is contradictory: " + *why);
  if (!goal.references_object_var()) {
    if (satisfied(goal, s, d)) return Plan{};
    auto p = search(s, goal, d, opts);
    if (!p) throw NoPlan("goal " + goal.str() + " is unreachable");
    return *p;
  }

  if (!goal.assumption) throw NoPlan("goal uses " + kObjectVar + " without an assumption");
  auto open = base.open_hypotheses(*goal.assumption);
  if (open.empty()) throw NoPlan("no open hypotheses remain for " + *goal.assumption);
  std::optional<Plan> best;
  for (const auto& h : open) {
    const auto& obj = h.claim.subject;
    State start = s;
    start.facts.insert({obj, "at", h.claim.object});
    start.facts.insert({obj, kUnverified, "yes"});
    Domain dh = d;
    dh.objects.insert(obj);
    auto p = search(start, goal.bind(obj), dh, opts);
    if (!p) continue;
    p->committed = h.id;
    p->committed_object = obj;
    if (!best || detail::better(*p, *best)) best = std::move(p);
  }
  if (!best) throw NoPlan("no open hypothesis of " + *goal.assumption + " yields a plan");
  return *best;
}

/// Refutes `failed` and plans again, or reports that the assumption has run
/// out of hypotheses.
inline std::variant<Plan, DiagnosisTrigger> replan_after_failure(const State& s, const Goal& goal,
                                                                 kb::KnowledgeBase& base, const Plan& previous,
                                                                 const std::string& failed,
                                                                 const SearchOptions& opts = {}) {
  if (!previous.committed || *previous.committed != failed)
    throw NotCommitted("hypothesis " + failed + " is not the one the plan committed to");
  base.refute_hypothesis(failed);
  const auto& assumption = base.hypothesis(failed).assumption;
  if (base.open_hypotheses(assumption).empty()) return DiagnosisTrigger{assumption};
  return plan(s, goal, base, opts);
}

/// Storage location for an object of class `cls`: the one holding the most
/// items of the same similarity group, falling back to the first by id.
inline EntityId storing_placement(const std::string& cls, const kb::KnowledgeBase& base) {
  std::vector<EntityId> candidates;
  for (const auto& e : base.entities_of_class("storage")) candidates.push_back(e.id);
  if (candidates.empty()) throw NoCupboard("no storage location is known");
  std::sort(candidates.begin(), candidates.end());
  const auto group = base.ontology().similarity_group(cls);
  if (!group) return candidates.front();
  EntityId best = candidates.front();
  std::size_t best_count = 0;
  for (const auto& c : candidates) {
    std::size_t count = 0;
    for (const auto& item : base.subjects({std::nullopt, "at", c})) {
      const auto& e = base.entity(item);
      if (base.ontology().is_a(e.cls, "object") && base.ontology().similarity_group(e.cls) == group) ++count;
    }
    if (count > best_count) {
      best = c;
      best_count = count;
    }
  }
  return best;
}

}  // namespace robostack::planner
