#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/core/distance_table.hpp"
#include "robostack/core/error.hpp"
#include "robostack/kb/ontology.hpp"

namespace robostack::kb {

using EntityId = std::string;

/// Id of the robot's own entity in every knowledge base.
inline const EntityId kRobot = "robot";

enum class Origin { Observed, Asserted, Hypothetical };

inline const char* to_string(Origin o) {
  switch (o) {
    case Origin::Observed: return "observed";
    case Origin::Asserted: return "asserted";
    case Origin::Hypothetical: return "hypothetical";
  }
  return "?";
}

struct Entity {
  EntityId id;
  std::string cls;
  Origin origin = Origin::Asserted;
};

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;

  std::string str() const { return "(" + subject + ", " + predicate + ", " + object + ")"; }
};

/// Triple with optional wildcards; `std::nullopt` matches anything.
struct Pattern {
  std::optional<std::string> subject;
  std::optional<std::string> predicate;
  std::optional<std::string> object;
};

enum class Determiner { Definite, Indefinite };

/// What a command says about an object: its class, how it was referred to, and
/// the KB instance it resolves to when one is already known.
struct ObjectDescriptor {
  std::string cls;
  Determiner determiner = Determiner::Indefinite;
  std::optional<EntityId> known_instance;

  bool operator==(const ObjectDescriptor&) const = default;
};

enum class HypothesisStatus { Open, Refuted, Confirmed };

inline const char* to_string(HypothesisStatus s) {
  switch (s) {
    case HypothesisStatus::Open: return "open";
    case HypothesisStatus::Refuted: return "refuted";
    case HypothesisStatus::Confirmed: return "confirmed";
  }
  return "?";
}

struct Hypothesis {
  std::string id;
  Triple claim;  // (hypothetical entity, at, location)
  std::string assumption;
  HypothesisStatus status = HypothesisStatus::Open;

  bool operator==(const Hypothesis&) const = default;
};

/// Operator-level assumption such as "apple in kitchen". Its children are kept
/// in search order.
struct Assumption {
  std::string id;
  std::string object_class;
  std::vector<EntityId> scope;  // rooms
  std::string description;
  HypothesisStatus status = HypothesisStatus::Open;
  std::vector<std::string> children;
};

struct DiagnosisChild {
  std::string hypothesis;
  std::string claim;
  HypothesisStatus status;
};

struct DiagnosisReport {
  std::string assumption_id;
  std::string assumption;
  std::vector<DiagnosisChild> children;
  std::string conclusion;
  bool invalid = false;

  nlohmann::json to_json() const {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : children)
      kids.push_back({{"hypothesis", c.hypothesis}, {"claim", c.claim}, {"status", to_string(c.status)}});
    return {{"id", assumption_id}, {"assumption", assumption}, {"children", kids}, {"conclusion", conclusion}};
  }
};

// Typed triple store over a closed relation set, plus the hypothesis lattice
// for objects an operator claims exist but the robot has not seen.
//
// Mutations need exclusive access; copies are cheap enough to serve as
// read-only snapshots for concurrent queries.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(Ontology ontology = Ontology::standard()) : ontology_(std::move(ontology)) {
    add_entity(kRobot, "robot", Origin::Asserted);
  }

  const Ontology& ontology() const { return ontology_; }

  // ---- entities ----------------------------------------------------------

  const Entity& add_entity(const EntityId& id, const std::string& cls, Origin origin) {
    if (id.empty()) throw UnknownEntity("empty entity id");
    if (!ontology_.has_class(cls)) throw UnknownClass("class '" + cls + "' is not declared");
    if (auto it = entities_.find(id); it != entities_.end()) {
      if (it->second.cls == cls && it->second.origin == origin) return it->second;
      throw DuplicateEntity("entity '" + id + "' already exists");
    }
    return entities_[id] = Entity{id, cls, origin};
  }

  bool has_entity(const EntityId& id) const { return entities_.count(id) > 0; }

  const Entity& entity(const EntityId& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw UnknownEntity("unknown entity '" + id + "'");
    return it->second;
  }

  bool is_hypothetical(const EntityId& id) const {
    auto it = entities_.find(id);
    return it != entities_.end() && it->second.origin == Origin::Hypothetical;
  }

  /// Follows confirmation aliases from a hypothetical id to the observed one.
  EntityId resolve(const EntityId& id) const {
    auto it = aliases_.find(id);
    return it == aliases_.end() ? id : it->second;
  }

  std::vector<Entity> entities_of_class(const std::string& cls, bool include_hypothetical = false) const {
    std::vector<Entity> out;
    for (const auto& [id, e] : entities_) {
      if (retired_.count(id)) continue;
      if (!include_hypothetical && e.origin == Origin::Hypothetical) continue;
      if (ontology_.is_a(e.cls, cls)) out.push_back(e);
    }
    return out;
  }

  // ---- facts -------------------------------------------------------------

  /// Inserts `t` after type-checking it. An `at` fact replaces the subject's
  /// previous location. Observing an object where an open hypothesis placed
  /// one of its class confirms that hypothesis.
  void assert_fact(const Triple& t) {
    type_check(t);
    if (t.predicate == "is-a") return;  // derived from the entity's class
    if (is_functional(t.predicate)) {
      for (auto it = triples_.begin(); it != triples_.end();) {
        if (it->first.subject == t.subject && it->first.predicate == t.predicate && it->first.object != t.object)
          it = triples_.erase(it);
        else
          ++it;
      }
    }
    triples_[t] = false;
    if (t.predicate == "at") confirm_matching(t);
  }

  /// Removes `t` if present; returns whether anything was removed.
  bool retract_fact(const Triple& t) { return triples_.erase(t) > 0; }

  bool contains(const Triple& t, bool include_hypothetical = true) const {
    auto it = triples_.find(t);
    return it != triples_.end() && (include_hypothetical || !it->second);
  }

  /// All facts matching `p`, sorted lexicographically. `is-a` is answered from
  /// the class hierarchy, so (?, is-a, fruit) also finds apples.
  std::vector<Triple> query(const Pattern& p, bool include_hypothetical = false) const {
    std::vector<Triple> out;
    if (!p.predicate || *p.predicate == "is-a") {
      for (const auto& [id, e] : entities_) {
        if (p.subject && *p.subject != id) continue;
        if (retired_.count(id)) continue;
        if (!include_hypothetical && e.origin == Origin::Hypothetical) continue;
        if (p.object) {
          if (ontology_.is_a(e.cls, *p.object)) out.push_back({id, "is-a", *p.object});
        } else {
          out.push_back({id, "is-a", e.cls});
        }
      }
    }
    if (!p.predicate || *p.predicate != "is-a") {
      for (const auto& [t, hypothetical] : triples_) {
        if (p.subject && *p.subject != t.subject) continue;
        if (p.predicate && *p.predicate != t.predicate) continue;
        if (p.object && *p.object != t.object) continue;
        if (!include_hypothetical && (hypothetical || is_hypothetical(t.subject) || is_hypothetical(t.object)))
          continue;
        out.push_back(t);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Subjects of `query(p)`, deduplicated and sorted.
  std::vector<std::string> subjects(const Pattern& p, bool include_hypothetical = false) const {
    std::vector<std::string> out;
    for (const auto& t : query(p, include_hypothetical)) out.push_back(t.subject);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<std::string> objects(const Pattern& p, bool include_hypothetical = false) const {
    std::vector<std::string> out;
    for (const auto& t : query(p, include_hypothetical)) out.push_back(t.object);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<Triple> all_triples(bool include_hypothetical = true) const {
    return query(Pattern{std::nullopt, std::nullopt, std::nullopt}, include_hypothetical);
  }

  std::optional<EntityId> location_of(const EntityId& id, bool include_hypothetical = true) const {
    auto r = objects({id, "at", std::nullopt}, include_hypothetical);
    if (r.empty()) return std::nullopt;
    return r.front();
  }

  std::optional<EntityId> room_of(const EntityId& location) const {
    auto r = objects({location, "in-room", std::nullopt});
    if (r.empty()) return std::nullopt;
    return r.front();
  }

  bool is_room(const EntityId& id) const {
    return has_entity(id) && ontology_.is_a(entity(id).cls, "room");
  }

  bool is_person(const EntityId& id) const {
    return has_entity(id) && ontology_.is_a(entity(id).cls, "person");
  }

  std::vector<EntityId> rooms() const {
    std::vector<EntityId> out;
    for (const auto& e : entities_of_class("room")) out.push_back(e.id);
    return out;
  }

  /// Locations in `room` whose class can hold objects, sorted by id.
  std::vector<EntityId> placement_locations(const EntityId& room) const {
    std::vector<EntityId> out;
    for (const auto& loc : subjects({std::nullopt, "in-room", room}))
      if (ontology_.is_a(entity(loc).cls, "placement")) out.push_back(loc);
    return out;
  }

  // ---- travel costs --------------------------------------------------------

  void set_distances(DistanceTable table) { distances_ = std::move(table); }
  const std::optional<DistanceTable>& distances() const { return distances_; }

  // ---- hypotheses ----------------------------------------------------------

  /// Creates one hypothetical entity and one open hypothesis per placement
  /// location in `scope`, grouped under a single assumption. Re-injecting an
  /// unconfirmed assumption returns its remaining open hypotheses.
  std::vector<Hypothesis> inject_hypotheses(const ObjectDescriptor& descriptor, std::vector<EntityId> scope) {
    if (!ontology_.has_class(descriptor.cls)) throw UnknownClass("class '" + descriptor.cls + "' is not declared");
    if (scope.empty()) throw UnknownRoom("empty hypothesis scope");
    for (const auto& r : scope)
      if (!is_room(r)) throw UnknownRoom("'" + r + "' is not a room");

    std::vector<EntityId> key = scope;
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    for (const auto& [id, a] : assumptions_) {
      if (a.status == HypothesisStatus::Confirmed || a.object_class != descriptor.cls) continue;
      auto other = a.scope;
      std::sort(other.begin(), other.end());
      if (other == key) return open_hypotheses(id);
    }

    std::vector<EntityId> locations;
    for (const auto& r : scope)
      for (const auto& loc : placement_locations(r)) locations.push_back(loc);
    if (locations.empty())
      throw NoPlacementLocations("no placement locations in " + join(scope, ", "));
    order_by_travel_cost(locations);

    Assumption a;
    a.id = "a" + std::to_string(++assumption_counter_);
    a.object_class = descriptor.cls;
    a.scope = scope;
    a.description = descriptor.cls + " in " + join(scope, " or ");
    std::vector<Hypothesis> created;
    for (const auto& loc : locations) {
      const auto n = std::to_string(++hypothesis_counter_);
      EntityId e = descriptor.cls + "-h" + n;
      add_entity(e, descriptor.cls, Origin::Hypothetical);
      Hypothesis h{"h" + n, Triple{e, "at", loc}, a.id, HypothesisStatus::Open};
      triples_[h.claim] = true;
      hypotheses_[h.id] = h;
      a.children.push_back(h.id);
      created.push_back(h);
    }
    assumptions_[a.id] = std::move(a);
    return created;
  }

  std::vector<Hypothesis> inject_hypotheses(const ObjectDescriptor& descriptor, const EntityId& room) {
    return inject_hypotheses(descriptor, std::vector<EntityId>{room});
  }

  /// Marks `id` refuted and retracts its hypothetical object. The assumption
  /// is refuted once every child is.
  void refute_hypothesis(const std::string& id) {
    auto& h = hypothesis_mut(id);
    if (h.status != HypothesisStatus::Open)
      throw HypothesisNotOpen("hypothesis " + id + " is " + to_string(h.status));
    h.status = HypothesisStatus::Refuted;
    retire(h.claim.subject);
    auto& a = assumptions_.at(h.assumption);
    const bool all_refuted = std::all_of(a.children.begin(), a.children.end(), [&](const std::string& c) {
      return hypotheses_.at(c).status == HypothesisStatus::Refuted;
    });
    if (all_refuted) a.status = HypothesisStatus::Refuted;
  }

  /// Confirms `id` by aliasing its hypothetical object to `observed`.
  void confirm_hypothesis(const std::string& id, const EntityId& observed) {
    auto& h = hypothesis_mut(id);
    if (h.status != HypothesisStatus::Open)
      throw HypothesisNotOpen("hypothesis " + id + " is " + to_string(h.status));
    h.status = HypothesisStatus::Confirmed;
    assumptions_.at(h.assumption).status = HypothesisStatus::Confirmed;
    if (observed != h.claim.subject) {
      aliases_[h.claim.subject] = observed;
      retire(h.claim.subject);
    } else {
      triples_[h.claim] = false;
    }
  }

  const Hypothesis& hypothesis(const std::string& id) const {
    auto it = hypotheses_.find(id);
    if (it == hypotheses_.end()) throw UnknownHypothesis("unknown hypothesis '" + id + "'");
    return it->second;
  }

  const Assumption& assumption(const std::string& id) const {
    auto it = assumptions_.find(id);
    if (it == assumptions_.end()) throw UnknownAssumption("unknown assumption '" + id + "'");
    return it->second;
  }

  std::vector<std::string> assumption_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : assumptions_) out.push_back(id);
    return out;
  }

  /// Children of `assumption_id` that are still open, in search order.
  std::vector<Hypothesis> open_hypotheses(const std::string& assumption_id) const {
    std::vector<Hypothesis> out;
    for (const auto& c : assumption(assumption_id).children)
      if (hypotheses_.at(c).status == HypothesisStatus::Open) out.push_back(hypotheses_.at(c));
    return out;
  }

  std::vector<Hypothesis> hypotheses_of(const std::string& assumption_id) const {
    std::vector<Hypothesis> out;
    for (const auto& c : assumption(assumption_id).children) out.push_back(hypotheses_.at(c));
    return out;
  }

  /// Hypothesis whose object is `entity`, if any.
  std::optional<Hypothesis> hypothesis_for_entity(const EntityId& entity) const {
    for (const auto& [id, h] : hypotheses_)
      if (h.claim.subject == entity) return h;
    return std::nullopt;
  }

  DiagnosisReport diagnose(const std::string& assumption_id) const {
    const auto& a = assumption(assumption_id);
    DiagnosisReport r;
    r.assumption_id = a.id;
    r.assumption = a.description;
    std::size_t open = 0, refuted = 0;
    std::optional<std::string> confirmed_at;
    for (const auto& c : a.children) {
      const auto& h = hypotheses_.at(c);
      r.children.push_back({h.id, h.claim.subject + " at " + h.claim.object, h.status});
      if (h.status == HypothesisStatus::Open) ++open;
      if (h.status == HypothesisStatus::Refuted) ++refuted;
      if (h.status == HypothesisStatus::Confirmed && !confirmed_at) confirmed_at = h.claim.object;
    }
    if (confirmed_at) {
      r.conclusion = "confirmed at " + *confirmed_at;
    } else if (refuted == a.children.size()) {
      r.conclusion = "invalid";
      r.invalid = true;
    } else {
      r.conclusion = "undetermined, " + std::to_string(open) + (open == 1 ? " location" : " locations") +
                     " unsearched";
    }
    return r;
  }

 private:
  static bool is_functional(const std::string& predicate) {
    return predicate == "at" || predicate == "at-pose" || predicate == "holds";
  }

  static std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
  }

  void type_check(const Triple& t) const {
    const auto* rel = ontology_.relation(t.predicate);
    if (!rel) throw RelationTypeError("undeclared relation '" + t.predicate + "'");
    const auto& subject = entity(t.subject);
    if (!ontology_.is_a(subject.cls, rel->domain))
      throw RelationTypeError(t.str() + ": '" + t.predicate + "' requires a " + rel->domain + " subject, got " +
                              subject.cls);
    switch (rel->range_kind) {
      case RangeKind::Entity: {
        const auto& object = entity(t.object);
        if (!ontology_.is_a(object.cls, rel->range))
          throw RelationTypeError(t.str() + ": '" + t.predicate + "' requires a " + rel->range + " object, got " +
                                  object.cls);
        break;
      }
      case RangeKind::Class:
        if (!ontology_.has_class(t.object)) throw RelationTypeError(t.str() + ": unknown class '" + t.object + "'");
        if (!ontology_.is_a(subject.cls, t.object))
          throw RelationTypeError(t.str() + ": entity classes are fixed at creation");
        break;
      case RangeKind::Literal:
        if (t.object.empty()) throw RelationTypeError(t.str() + ": empty literal");
        break;
    }
  }

  Hypothesis& hypothesis_mut(const std::string& id) {
    auto it = hypotheses_.find(id);
    if (it == hypotheses_.end()) throw UnknownHypothesis("unknown hypothesis '" + id + "'");
    return it->second;
  }

  void retire(const EntityId& e) {
    retired_.insert(e);
    for (auto it = triples_.begin(); it != triples_.end();) {
      if (it->first.subject == e || it->first.object == e)
        it = triples_.erase(it);
      else
        ++it;
    }
  }

  void confirm_matching(const Triple& t) {
    const auto& subject = entity(t.subject);
    std::vector<std::string> matched;
    for (const auto& [id, h] : hypotheses_) {
      if (h.status != HypothesisStatus::Open || h.claim.object != t.object) continue;
      if (subject.origin == Origin::Hypothetical) {
        if (h.claim == t) matched.push_back(id);
      } else if (ontology_.is_a(subject.cls, entity(h.claim.subject).cls)) {
        matched.push_back(id);
      }
    }
    for (const auto& id : matched) confirm_hypothesis(id, t.subject);
  }

  void order_by_travel_cost(std::vector<EntityId>& locations) const {
    std::sort(locations.begin(), locations.end());
    locations.erase(std::unique(locations.begin(), locations.end()), locations.end());
    auto here = location_of(kRobot, false);
    if (!distances_ || !here || !distances_->contains(*here)) return;
    std::stable_sort(locations.begin(), locations.end(), [&](const EntityId& a, const EntityId& b) {
      return (*distances_)(*here, a) < (*distances_)(*here, b);
    });
  }

  Ontology ontology_;
  std::map<EntityId, Entity> entities_;
  std::map<Triple, bool> triples_;  // value: hypothetical claim
  std::map<std::string, Hypothesis> hypotheses_;
  std::map<std::string, Assumption> assumptions_;
  std::map<EntityId, EntityId> aliases_;
  std::set<EntityId> retired_;
  std::optional<DistanceTable> distances_;
  unsigned hypothesis_counter_ = 0;
  unsigned assumption_counter_ = 0;
};

}  // namespace robostack::kb
