#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/core/error.hpp"
#include "robostack/kb/knowledge_base.hpp"

namespace robostack::grammar {

using kb::Determiner;
using kb::ObjectDescriptor;

/// Raised when an utterance is not derivable; `position` is the index of the
/// token where the longest partial match broke down.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string token, const std::string& what)
      : Error("ParseError", what), position_(position), token_(std::move(token)) {}
  std::size_t position() const { return position_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t position_;
  std::string token_;
};

enum class Task { Bring, Go, FindObject, FindPerson, Guide, Follow, Say, Store };

inline const std::vector<std::pair<Task, std::string>>& task_names() {
  static const std::vector<std::pair<Task, std::string>> names{
      {Task::Bring, "bring"},   {Task::Go, "go"},         {Task::FindObject, "find_object"},
      {Task::FindPerson, "find_person"}, {Task::Guide, "guide"}, {Task::Follow, "follow"},
      {Task::Say, "say"},       {Task::Store, "store"}};
  return names;
}

inline std::string to_string(Task t) {
  for (const auto& [k, n] : task_names())
    if (k == t) return n;
  return "?";
}

inline std::optional<Task> task_from_string(const std::string& s) {
  for (const auto& [k, n] : task_names())
    if (n == s) return k;
  return std::nullopt;
}

struct CommandFrame {
  Task task = Task::Go;
  std::optional<ObjectDescriptor> object;
  std::optional<std::string> source;       // room id
  std::optional<std::string> destination;  // room id
  std::optional<std::string> person;
  std::optional<std::string> payload;

  bool operator==(const CommandFrame&) const = default;

  /// Field presence required by the task.
  void validate() const {
    auto need = [&](bool ok, const char* what) {
      if (!ok) throw InvalidGrammar(to_string(task) + " frame requires " + what);
    };
    switch (task) {
      case Task::Bring: need(object.has_value(), "an object"); need(person.has_value(), "a recipient"); break;
      case Task::Go: need(destination.has_value(), "a destination"); break;
      case Task::FindObject: need(object.has_value(), "an object"); break;
      case Task::FindPerson: need(person.has_value(), "a person"); break;
      case Task::Guide: need(person && destination, "a person and a destination"); break;
      case Task::Follow: need(person.has_value(), "a person"); break;
      case Task::Say: need(person && payload, "a person and a payload"); break;
      case Task::Store: need(object.has_value(), "an object"); break;
    }
    if (object && object->determiner == Determiner::Indefinite && object->known_instance)
      throw InvalidGrammar("indefinite descriptors never name a known instance");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"task", to_string(task)}};
    if (object)
      j["object"] = {{"class", object->cls},
                     {"determiner", object->determiner == Determiner::Definite ? "definite" : "indefinite"}};
    if (source) j["source"] = *source;
    if (destination) j["destination"] = *destination;
    if (person) j["person"] = *person;
    if (payload) j["payload"] = *payload;
    return j;
  }

  static CommandFrame from_json(const nlohmann::json& j) {
    CommandFrame f;
    auto t = task_from_string(j.at("task").get<std::string>());
    if (!t) throw InvalidGrammar("unknown task " + j.at("task").dump());
    f.task = *t;
    if (j.contains("object")) {
      ObjectDescriptor d;
      d.cls = j["object"].at("class").get<std::string>();
      d.determiner = j["object"].value("determiner", "indefinite") == "definite" ? Determiner::Definite
                                                                                  : Determiner::Indefinite;
      f.object = d;
    }
    auto opt = [&](const char* k, std::optional<std::string>& out) {
      if (j.contains(k)) out = j[k].get<std::string>();
    };
    opt("source", f.source);
    opt("destination", f.destination);
    opt("person", f.person);
    opt("payload", f.payload);
    return f;
  }
};

// ---- text normalization ------------------------------------------------------

/// Lowercases, splits on whitespace, makes commas their own token, and drops
/// terminal punctuation.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::string s;
  for (char c : text) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '.' || s.back() == '!' ||
                        s.back() == '?'))
    s.pop_back();
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == ',') {
      flush();
      out.emplace_back(",");
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty() && t != ",") out += ' ';
    out += t;
  }
  return out;
}

// ---- grammar spec ------------------------------------------------------------

struct ObjectWord {
  std::vector<std::string> words;
  std::string cls;
  bool mass = false;  // takes "some" instead of "a"/"an"
};

struct RoomWord {
  std::vector<std::string> words;
  std::string id;
};

struct PhraseWord {
  std::vector<std::string> words;
  std::string value;
};

enum class Slot { Object, Source, Destination, Person, Payload };

inline std::optional<Slot> slot_from_string(const std::string& s) {
  if (s == "obj") return Slot::Object;
  if (s == "source") return Slot::Source;
  if (s == "destination") return Slot::Destination;
  if (s == "person") return Slot::Person;
  if (s == "payload") return Slot::Payload;
  return std::nullopt;
}

/// One pattern element: a literal token, an alternation of token sequences, or a slot.
struct Element {
  enum class Kind { Literal, Choice, Slot } kind = Kind::Literal;
  std::string literal;
  std::vector<std::vector<std::string>> choices;
  Slot slot = Slot::Object;
};

struct Rule {
  Task task = Task::Go;
  std::string pattern;
  std::vector<Element> elements;
  CommandFrame fixed;  // values the rule supplies without a slot (e.g. "me" -> operator)
};

namespace detail {

inline std::vector<Element> compile_pattern(const std::string& pattern) {
  std::vector<Element> out;
  std::size_t i = 0;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (auto& t : tokenize(word)) out.push_back({Element::Kind::Literal, t, {}, Slot::Object});
    word.clear();
  };
  while (i < pattern.size()) {
    const char c = pattern[i];
    if (c == '{') {
      flush();
      auto end = pattern.find('}', i);
      if (end == std::string::npos) throw InvalidGrammar("unterminated slot in '" + pattern + "'");
      auto name = pattern.substr(i + 1, end - i - 1);
      auto slot = slot_from_string(name);
      if (!slot) throw InvalidGrammar("unknown slot {" + name + "} in '" + pattern + "'");
      out.push_back({Element::Kind::Slot, "", {}, *slot});
      i = end + 1;
    } else if (c == '(') {
      flush();
      auto end = pattern.find(')', i);
      if (end == std::string::npos) throw InvalidGrammar("unterminated alternation in '" + pattern + "'");
      Element e{Element::Kind::Choice, "", {}, Slot::Object};
      std::string body = pattern.substr(i + 1, end - i - 1);
      std::size_t start = 0;
      for (;;) {
        auto bar = body.find('|', start);
        auto alt = tokenize(body.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
        if (alt.empty()) throw InvalidGrammar("empty alternative in '" + pattern + "'");
        e.choices.push_back(std::move(alt));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
      out.push_back(std::move(e));
      i = end + 1;
    } else if (c == ')' || c == '}' || c == '|') {
      throw InvalidGrammar("stray '" + std::string(1, c) + "' in '" + pattern + "'");
    } else {
      word += c;
      ++i;
    }
  }
  flush();
  if (out.empty()) throw InvalidGrammar("empty pattern");
  return out;
}

inline bool starts_with_vowel(const std::string& w) {
  return !w.empty() && std::string("aeiou").find(w.front()) != std::string::npos;
}

}  // namespace detail

class Grammar {
 public:
  std::string version;
  std::vector<ObjectWord> objects;
  std::vector<RoomWord> rooms;
  std::vector<std::string> names;
  std::vector<PhraseWord> phrases;
  std::vector<Rule> rules;

  static Grammar from_json(const nlohmann::json& j) {
    Grammar g;
    try {
      g.version = j.at("version").get<std::string>();
      const auto& v = j.at("vocabulary");
      for (const auto& o : v.at("objects"))
        g.objects.push_back({tokenize(o.at("word").get<std::string>()), o.at("class").get<std::string>(),
                             o.value("mass", false)});
      for (const auto& r : v.at("rooms"))
        g.rooms.push_back({tokenize(r.at("word").get<std::string>()), r.at("id").get<std::string>()});
      for (const auto& n : v.at("names")) g.names.push_back(n.get<std::string>());
      for (const auto& p : v.value("phrases", nlohmann::json::array())) {
        auto text = p.is_string() ? p.get<std::string>() : p.at("word").get<std::string>();
        g.phrases.push_back({tokenize(text), detokenize(tokenize(text))});
      }
      for (const auto& r : j.at("rules")) {
        Rule rule;
        auto task = task_from_string(r.at("task").get<std::string>());
        if (!task) throw InvalidGrammar("unknown task '" + r.at("task").get<std::string>() + "'");
        rule.task = *task;
        rule.pattern = r.at("pattern").get<std::string>();
        rule.elements = detail::compile_pattern(rule.pattern);
        auto fixed = r.value("frame", nlohmann::json::object());
        fixed["task"] = r.at("task");
        rule.fixed = CommandFrame::from_json(fixed);
        g.rules.push_back(std::move(rule));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidGrammar(std::string("malformed grammar: ") + e.what());
    }
    g.validate();
    return g;
  }

  static Grammar load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InvalidGrammar("cannot open grammar file " + file.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidGrammar("grammar file " + file.string() + " is not valid JSON");
    }
    return from_json(j);
  }

  /// Structural checks: vocabulary is well formed, every fixed frame value is
  /// a vocabulary term, and each rule fills the fields its task requires.
  void validate() const {
    if (version.empty()) throw InvalidGrammar("grammar has no version");
    if (rules.empty()) throw InvalidGrammar("grammar has no rules");
    std::set<std::vector<std::string>> seen_obj, seen_room;
    for (const auto& o : objects) {
      if (o.words.empty() || o.cls.empty()) throw InvalidGrammar("empty object entry");
      if (!seen_obj.insert(o.words).second) throw InvalidGrammar("duplicate object word '" + detokenize(o.words) + "'");
    }
    for (const auto& r : rooms) {
      if (r.words.empty() || r.id.empty()) throw InvalidGrammar("empty room entry");
      if (!seen_room.insert(r.words).second) throw InvalidGrammar("duplicate room word '" + detokenize(r.words) + "'");
    }
    std::set<std::string> name_set(names.begin(), names.end());
    if (name_set.size() != names.size()) throw InvalidGrammar("duplicate person name");
    for (const auto& n : names)
      if (tokenize(n) != std::vector<std::string>{n}) throw InvalidGrammar("person name '" + n + "' is not one token");

    for (const auto& r : rules) {
      std::set<Slot> slots;
      for (const auto& e : r.elements)
        if (e.kind == Element::Kind::Slot && !slots.insert(e.slot).second)
          throw InvalidGrammar("slot repeated in '" + r.pattern + "'");
      auto vocab_empty = [&](Slot s) {
        switch (s) {
          case Slot::Object: return objects.empty();
          case Slot::Source:
          case Slot::Destination: return rooms.empty();
          case Slot::Person: return names.empty();
          case Slot::Payload: return phrases.empty();
        }
        return true;
      };
      for (auto s : slots)
        if (vocab_empty(s)) throw InvalidGrammar("'" + r.pattern + "' uses a slot with an empty vocabulary");
      if (r.fixed.person && !name_set.count(*r.fixed.person))
        throw InvalidGrammar("fixed person '" + *r.fixed.person + "' is not in the vocabulary");
      for (const auto* room : {&r.fixed.source, &r.fixed.destination})
        if (*room && std::none_of(rooms.begin(), rooms.end(), [&](const RoomWord& w) { return w.id == **room; }))
          throw InvalidGrammar("fixed room '" + **room + "' is not in the vocabulary");
      CommandFrame probe = r.fixed;
      if (slots.count(Slot::Object)) probe.object = ObjectDescriptor{"x", Determiner::Definite, std::nullopt};
      if (slots.count(Slot::Source)) probe.source = "x";
      if (slots.count(Slot::Destination)) probe.destination = "x";
      if (slots.count(Slot::Person)) probe.person = "x";
      if (slots.count(Slot::Payload)) probe.payload = "x";
      try {
        probe.validate();
      } catch (const InvalidGrammar& e) {
        throw InvalidGrammar("rule '" + r.pattern + "': " + e.what());
      }
    }
  }

  // ---- generation --------------------------------------------------------------

  struct Derivation {
    std::string utterance;
    CommandFrame frame;
  };

  /// Seeded derivation with uniform choice at every decision point.
  Derivation generate(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const Rule& rule = rules[pick(rules.size())];
    CommandFrame f = rule.fixed;
    std::vector<std::string> tokens;
    for (const auto& e : rule.elements) {
      switch (e.kind) {
        case Element::Kind::Literal: tokens.push_back(e.literal); break;
        case Element::Kind::Choice: {
          const auto& alt = e.choices[pick(e.choices.size())];
          tokens.insert(tokens.end(), alt.begin(), alt.end());
          break;
        }
        case Element::Kind::Slot: {
          auto options = slot_options(e.slot, f);
          auto& chosen = options[pick(options.size())];
          tokens.insert(tokens.end(), chosen.first.begin(), chosen.first.end());
          chosen.second(f);
          break;
        }
      }
    }
    return {detokenize(tokens), f};
  }

  /// Every derivation of every rule, in rule order.
  void enumerate(const std::function<void(const Derivation&)>& visit) const {
    for (const auto& rule : rules) {
      std::vector<std::string> tokens;
      expand(rule, 0, rule.fixed, tokens, visit);
    }
  }

  // ---- parsing -----------------------------------------------------------------

  /// All frames `utterance` derives; more than one distinct frame means the
  /// grammar is ambiguous on it.
  std::vector<CommandFrame> parse_all(const std::string& utterance, std::size_t* furthest = nullptr) const {
    const auto tokens = tokenize(utterance);
    std::vector<CommandFrame> out;
    std::size_t far = 0;
    for (const auto& rule : rules) match(rule, 0, 0, tokens, rule.fixed, out, far);
    if (furthest) *furthest = far;
    return out;
  }

  CommandFrame parse(const std::string& utterance) const {
    std::size_t far = 0;
    auto frames = parse_all(utterance, &far);
    if (!frames.empty()) return frames.front();
    const auto tokens = tokenize(utterance);
    if (tokens.empty()) throw ParseError(0, "", "empty command");
    const std::string tok = far < tokens.size() ? tokens[far] : "<end>";
    throw ParseError(far, tok, "cannot parse command: unexpected '" + tok + "' at token " + std::to_string(far));
  }

 private:
  using Filler = std::pair<std::vector<std::string>, std::function<void(CommandFrame&)>>;

  // Surface forms and frame updates a slot can take, given what is already bound.
  std::vector<Filler> slot_options(Slot s, const CommandFrame& sofar) const {
    std::vector<Filler> out;
    switch (s) {
      case Slot::Object:
        for (const auto& o : objects) {
          for (auto det : {Determiner::Definite, Determiner::Indefinite}) {
            std::vector<std::string> w;
            if (det == Determiner::Definite)
              w.push_back("the");
            else
              w.push_back(o.mass ? "some" : detail::starts_with_vowel(o.words.front()) ? "an" : "a");
            w.insert(w.end(), o.words.begin(), o.words.end());
            out.push_back({w, [cls = o.cls, det](CommandFrame& f) {
                             f.object = ObjectDescriptor{cls, det, std::nullopt};
                           }});
          }
        }
        break;
      case Slot::Source:
      case Slot::Destination: {
        // a command never names the same room as both source and destination
        const auto& other = s == Slot::Source ? sofar.destination : sofar.source;
        for (const auto& r : rooms) {
          if (other && *other == r.id) continue;
          out.push_back({r.words, [id = r.id, s](CommandFrame& f) {
                           (s == Slot::Source ? f.source : f.destination) = id;
                         }});
        }
        break;
      }
      case Slot::Person:
        for (const auto& n : names) out.push_back({{n}, [n](CommandFrame& f) { f.person = n; }});
        break;
      case Slot::Payload:
        for (const auto& p : phrases) out.push_back({p.words, [v = p.value](CommandFrame& f) { f.payload = v; }});
        break;
    }
    return out;
  }

  void expand(const Rule& rule, std::size_t i, const CommandFrame& f, std::vector<std::string>& tokens,
              const std::function<void(const Derivation&)>& visit) const {
    if (i == rule.elements.size()) {
      visit({detokenize(tokens), f});
      return;
    }
    const auto& e = rule.elements[i];
    const auto mark = tokens.size();
    auto recurse = [&](const std::vector<std::string>& words, const CommandFrame& next) {
      tokens.insert(tokens.end(), words.begin(), words.end());
      expand(rule, i + 1, next, tokens, visit);
      tokens.resize(mark);
    };
    switch (e.kind) {
      case Element::Kind::Literal: recurse({e.literal}, f); break;
      case Element::Kind::Choice:
        for (const auto& alt : e.choices) recurse(alt, f);
        break;
      case Element::Kind::Slot:
        for (const auto& [words, apply] : slot_options(e.slot, f)) {
          CommandFrame next = f;
          apply(next);
          recurse(words, next);
        }
        break;
    }
  }

  static bool matches_at(const std::vector<std::string>& tokens, std::size_t pos, const std::vector<std::string>& w,
                         std::size_t& far) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (pos + k >= tokens.size() || tokens[pos + k] != w[k]) {
        far = std::max(far, pos + k);
        return false;
      }
    }
    return true;
  }

  void match(const Rule& rule, std::size_t i, std::size_t pos, const std::vector<std::string>& tokens,
             const CommandFrame& f, std::vector<CommandFrame>& out, std::size_t& far) const {
    if (i == rule.elements.size()) {
      if (pos == tokens.size()) {
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
      } else {
        far = std::max(far, pos);
      }
      return;
    }
    const auto& e = rule.elements[i];
    switch (e.kind) {
      case Element::Kind::Literal:
        if (matches_at(tokens, pos, {e.literal}, far)) match(rule, i + 1, pos + 1, tokens, f, out, far);
        break;
      case Element::Kind::Choice:
        for (const auto& alt : e.choices)
          if (matches_at(tokens, pos, alt, far)) match(rule, i + 1, pos + alt.size(), tokens, f, out, far);
        break;
      case Element::Kind::Slot:
        for (const auto& [words, apply] : slot_options(e.slot, f)) {
          // A determiner that matched means the failure lies in the noun itself.
          if (matches_at(tokens, pos, words, far)) {
            CommandFrame next = f;
            apply(next);
            match(rule, i + 1, pos + words.size(), tokens, next, out, far);
          }
        }
        break;
    }
  }
};

}  // namespace robostack::grammar
