#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/core/distance_table.hpp"
#include "robostack/core/error.hpp"
#include "robostack/kb/knowledge_base.hpp"

namespace robostack::sim {

using kb::EntityId;

struct LocationSpec {
  EntityId id;
  std::string cls;
  EntityId room;
};

struct ObjectSpec {
  EntityId id;
  std::string cls;
  EntityId true_location;
  bool known = false;
};

struct PersonSpec {
  EntityId name;
  std::vector<EntityId> waypoints;  // first entry is the starting location
  bool compliant = true;
};

struct ClassSpec {
  std::string name;
  std::vector<std::string> parents;
  bool group = false;
};

/// Per-skill success probability and the failure class reported on a miss.
/// Skills absent from the model always succeed (find still reflects ground
/// truth).
struct SkillOutcomeModel {
  struct Entry {
    double success = 1.0;
    std::string failure = "failed";
  };
  std::map<std::string, Entry> skills;

  const Entry* find(const std::string& skill) const {
    auto it = skills.find(skill);
    return it == skills.end() ? nullptr : &it->second;
  }
};

struct WorldSpec {
  std::string name;
  std::uint64_t seed = 0;
  EntityId robot_start;
  std::vector<ClassSpec> classes;
  std::vector<EntityId> rooms;
  std::vector<LocationSpec> locations;
  DistanceTable distances;
  std::vector<ObjectSpec> objects;
  std::vector<PersonSpec> people;
  SkillOutcomeModel outcome_model;
  double robot_speed = 0.5;   // m/s
  double tick_seconds = 0.01;

  const LocationSpec* location(const EntityId& id) const {
    for (const auto& l : locations)
      if (l.id == id) return &l;
    return nullptr;
  }
};

struct LoadedWorld {
  WorldSpec spec;
  kb::KnowledgeBase kb;
};

namespace detail {

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses and validates a world document. Throws SchemaError on structural
/// problems and MetricViolation when the distance table is not a metric.
inline WorldSpec parse_world(const nlohmann::json& j) {
  using detail::field;
  if (!j.is_object()) throw SchemaError("world must be a JSON object");
  WorldSpec w;
  w.name = j.value("name", "world");
  w.seed = j.value("seed", std::uint64_t{0});
  w.robot_speed = j.value("robot_speed", 0.5);
  w.tick_seconds = j.value("tick_seconds", 0.01);
  if (!(w.robot_speed > 0) || !(w.tick_seconds > 0)) throw SchemaError("robot_speed and tick_seconds must be > 0");

  for (const auto& c : j.value("classes", nlohmann::json::array()))
    w.classes.push_back({field<std::string>(c, "name", "class"), c.value("parents", std::vector<std::string>{}),
                         c.value("group", false)});

  w.rooms = field<std::vector<std::string>>(j, "rooms", "world");
  if (w.rooms.empty()) throw SchemaError("world has no rooms");
  std::set<EntityId> rooms(w.rooms.begin(), w.rooms.end());
  if (rooms.size() != w.rooms.size()) throw SchemaError("duplicate room id");

  std::set<EntityId> locs;
  for (const auto& l : field<nlohmann::json>(j, "locations", "world")) {
    LocationSpec ls{field<std::string>(l, "id", "location"), l.value("class", std::string("placement")),
                    field<std::string>(l, "room", "location")};
    if (!rooms.count(ls.room)) throw SchemaError("location '" + ls.id + "' is in unknown room '" + ls.room + "'");
    if (!locs.insert(ls.id).second) throw SchemaError("duplicate location '" + ls.id + "'");
    w.locations.push_back(ls);
  }
  if (w.locations.empty()) throw SchemaError("world has no locations");

  for (const auto& e : field<nlohmann::json>(j, "distances", "world")) {
    if (!e.is_array() || e.size() != 3) throw SchemaError("distance entries are [from, to, cost]");
    const auto a = e[0].get<std::string>(), b = e[1].get<std::string>();
    if (!locs.count(a) || !locs.count(b)) throw SchemaError("distance entry names unknown location");
    w.distances.set(a, b, e[2].get<double>());
  }
  for (const auto& l : locs) w.distances.add_location(l);
  w.distances.validate();

  w.robot_start = j.value("robot_start", w.locations.front().id);
  if (!locs.count(w.robot_start)) throw SchemaError("robot_start '" + w.robot_start + "' is not a location");

  std::set<EntityId> ids(locs.begin(), locs.end());
  ids.insert(rooms.begin(), rooms.end());
  for (const auto& o : j.value("objects", nlohmann::json::array())) {
    ObjectSpec os{field<std::string>(o, "id", "object"), field<std::string>(o, "class", "object"),
                  field<std::string>(o, "true_location", "object"), o.value("known", false)};
    if (!locs.count(os.true_location))
      throw SchemaError("object '" + os.id + "' has unknown true_location '" + os.true_location + "'");
    if (!ids.insert(os.id).second) throw SchemaError("duplicate id '" + os.id + "'");
    w.objects.push_back(os);
  }
  for (const auto& p : j.value("people", nlohmann::json::array())) {
    PersonSpec ps{field<std::string>(p, "name", "person"), field<std::vector<std::string>>(p, "waypoints", "person"),
                  p.value("compliant", true)};
    if (ps.waypoints.empty()) throw SchemaError("person '" + ps.name + "' has no waypoints");
    for (const auto& wp : ps.waypoints)
      if (!locs.count(wp)) throw SchemaError("person '" + ps.name + "' waypoint '" + wp + "' is not a location");
    if (!ids.insert(ps.name).second) throw SchemaError("duplicate id '" + ps.name + "'");
    w.people.push_back(ps);
  }
  const auto model = j.value("outcome_model", nlohmann::json::object());
  for (const auto& [skill, m] : model.items()) {
    if (!m.is_object()) throw SchemaError("outcome model entry for '" + skill + "' must be an object");
    SkillOutcomeModel::Entry e{m.value("success", 1.0), m.value("failure", std::string("failed"))};
    if (e.success < 0.0 || e.success > 1.0) throw SchemaError("outcome probability for '" + skill + "' not in [0,1]");
    w.outcome_model.skills[skill] = e;
  }
  return w;
}

/// Knowledge base seeded with rooms, locations, people, the robot, and the
/// objects marked `known`. Hidden objects stay out until found.
inline kb::KnowledgeBase seed_knowledge_base(const WorldSpec& w) {
  auto onto = kb::Ontology::standard();
  try {
    for (const auto& c : w.classes) onto.add_class(c.name, c.parents, c.group);
  } catch (const Error& e) {
    throw SchemaError(std::string("class declarations: ") + e.what());
  }
  kb::KnowledgeBase base(std::move(onto));
  try {
    for (const auto& r : w.rooms) base.add_entity(r, "room", kb::Origin::Asserted);
    for (const auto& l : w.locations) {
      if (!base.ontology().is_a(l.cls, "location"))
        throw SchemaError("location '" + l.id + "' has non-location class '" + l.cls + "'");
      base.add_entity(l.id, l.cls, kb::Origin::Asserted);
      base.assert_fact({l.id, "in-room", l.room});
    }
    base.assert_fact({kb::kRobot, "at", w.robot_start});
    for (const auto& p : w.people) {
      base.add_entity(p.name, "person", kb::Origin::Asserted);
      base.assert_fact({p.name, "at", p.waypoints.front()});
    }
    for (const auto& o : w.objects) {
      if (!base.ontology().has_class(o.cls)) throw SchemaError("object '" + o.id + "' has undeclared class");
      if (!o.known) continue;
      base.add_entity(o.id, o.cls, kb::Origin::Asserted);
      base.assert_fact({o.id, "at", o.true_location});
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
  base.set_distances(w.distances);
  return base;
}

inline LoadedWorld load_world(const nlohmann::json& j) {
  auto spec = parse_world(j);
  auto base = seed_knowledge_base(spec);
  return {std::move(spec), std::move(base)};
}

inline LoadedWorld load_world(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open world file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("world file " + file.string() + " is not valid JSON: " + e.what());
  }
  return load_world(j);
}

}  // namespace robostack::sim
