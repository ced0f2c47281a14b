#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robostack/core/error.hpp"

namespace robostack::kb {

enum class RangeKind { Entity, Class, Literal };

struct RelationDecl {
  std::string name;
  std::string domain;  // subject class
  RangeKind range_kind = RangeKind::Entity;
  std::string range;  // object class when range_kind == Entity
};

// Class hierarchy (is-a DAG), declared relations, and similarity groups.
class Ontology {
 public:
  // Root class every declared class descends from.
  static constexpr const char* kRoot = "thing";

  Ontology() { classes_[kRoot] = {}; }

  void add_class(const std::string& name, const std::vector<std::string>& parents, bool group = false) {
    if (name.empty()) throw OntologyError("empty class name");
    for (const auto& p : parents)
      if (!has_class(p)) throw UnknownClass("parent class '" + p + "' of '" + name + "' not declared");
    auto& node = classes_[name];
    for (const auto& p : parents) {
      if (p == name || is_a(p, name)) throw OntologyError("is-a cycle through '" + name + "'");
      node.parents.insert(p);
    }
    if (parents.empty() && name != kRoot) node.parents.insert(kRoot);
    node.group = node.group || group;
  }

  void add_relation(RelationDecl decl) {
    if (!has_class(decl.domain)) throw UnknownClass("relation domain '" + decl.domain + "'");
    if (decl.range_kind == RangeKind::Entity && !has_class(decl.range))
      throw UnknownClass("relation range '" + decl.range + "'");
    relations_[decl.name] = std::move(decl);
  }

  bool has_class(const std::string& c) const { return classes_.count(c) > 0; }

  const RelationDecl* relation(const std::string& name) const {
    auto it = relations_.find(name);
    return it == relations_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> relation_names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : relations_) out.push_back(k);
    return out;
  }

  /// True when `sub` equals `super` or descends from it.
  bool is_a(const std::string& sub, const std::string& super) const {
    if (sub == super) return true;
    auto it = classes_.find(sub);
    if (it == classes_.end()) return false;
    for (const auto& p : it->second.parents)
      if (is_a(p, super)) return true;
    return false;
  }

  /// Nearest ancestor (or the class itself) flagged as a similarity group.
  std::optional<std::string> similarity_group(const std::string& c) const {
    auto it = classes_.find(c);
    if (it == classes_.end()) return std::nullopt;
    if (it->second.group) return c;
    for (const auto& p : it->second.parents)
      if (auto g = similarity_group(p)) return g;
    return std::nullopt;
  }

  std::vector<std::string> classes() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : classes_) out.push_back(k);
    return out;
  }

  // The category structure used by the bundled worlds and grammar.
  static Ontology standard() {
    Ontology o;
    o.add_class("physical", {});
    o.add_class("place", {});
    o.add_class("object", {"physical"});
    o.add_class("agent", {"physical"});
    o.add_class("person", {"agent"});
    o.add_class("robot", {"agent"});
    o.add_class("landmark", {"physical"});
    for (const char* c : {"placard", "sign"}) o.add_class(c, {"landmark"});

    o.add_class("food", {"object"});
    o.add_class("fruit", {"food"}, true);
    for (const char* c : {"apple", "orange", "pear", "banana"}) o.add_class(c, {"fruit"});
    o.add_class("snack", {"food"}, true);
    for (const char* c : {"cereal", "chips", "cookies"}) o.add_class(c, {"snack"});
    o.add_class("drink", {"object"}, true);
    for (const char* c : {"juice", "milk", "coke", "coffee", "water"}) o.add_class(c, {"drink"});
    o.add_class("cleaning", {"object"}, true);
    for (const char* c : {"sponge", "soap"}) o.add_class(c, {"cleaning"});
    o.add_class("container", {"object"});
    for (const char* c : {"bag", "bowl", "cup"}) o.add_class(c, {"container"});

    o.add_class("room", {"place"});
    o.add_class("location", {"place"});
    o.add_class("waypoint", {"location"});
    o.add_class("placement", {"location"});
    o.add_class("surface", {"placement"});
    for (const char* c : {"counter", "table", "desk", "nightstand", "dresser", "tv-stand", "bench", "bar", "sink"})
      o.add_class(c, {"surface"});
    o.add_class("storage", {"placement"});
    for (const char* c : {"cupboard", "shelf", "bookshelf"}) o.add_class(c, {"storage"});

    o.add_relation({"is-a", kRoot, RangeKind::Class, ""});
    o.add_relation({"at", "physical", RangeKind::Entity, "location"});
    o.add_relation({"in-room", "location", RangeKind::Entity, "room"});
    o.add_relation({"has-attribute", kRoot, RangeKind::Literal, ""});
    o.add_relation({"holds", "robot", RangeKind::Entity, "object"});
    o.add_relation({"near", "physical", RangeKind::Entity, "physical"});
    o.add_relation({"delivered-to", "object", RangeKind::Entity, "person"});
    o.add_relation({"at-pose", "landmark", RangeKind::Literal, ""});
    o.add_relation({"labeled", "landmark", RangeKind::Literal, ""});
    return o;
  }

 private:
  struct ClassNode {
    std::set<std::string> parents;
    bool group = false;
  };

  std::map<std::string, ClassNode> classes_;
  std::map<std::string, RelationDecl> relations_;
};

}  // namespace robostack::kb
