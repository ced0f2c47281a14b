#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/core/error.hpp"

namespace robostack::hfsm {

/// Reserved event that sends the innermost machine to its recovery state.
inline const std::string kError = "error";

inline const std::vector<std::string>& terminal_states() {
  static const std::vector<std::string> t{"succeeded", "failed", "aborted"};
  return t;
}

inline bool is_terminal(const std::string& s) {
  const auto& t = terminal_states();
  return std::find(t.begin(), t.end(), s) != t.end();
}

struct MachineDefinition;

struct StateDef {
  std::string entry;                          // command emitted on entry (leaf)
  std::shared_ptr<MachineDefinition> child;   // nested machine (composite)

  bool composite() const { return child != nullptr; }
};

struct Transition {
  std::string from;
  std::string event;
  std::string to;
};

struct MachineDefinition {
  std::string name;
  std::vector<std::string> events;  // declared alphabet; children inherit the root's
  std::map<std::string, StateDef> states;
  std::vector<Transition> transitions;
  std::string initial;
  std::string recovery;

  const Transition* find_transition(const std::string& from, const std::string& event) const {
    for (const auto& t : transitions)
      if (t.from == from && t.event == event) return &t;
    return nullptr;
  }

  static MachineDefinition from_json(const nlohmann::json& j, const std::string& fallback_name = "machine") {
    MachineDefinition m;
    try {
      m.name = j.value("name", fallback_name);
      m.events = j.value("events", std::vector<std::string>{});
      m.initial = j.at("initial").get<std::string>();
      m.recovery = j.value("recovery", std::string{});
      for (const auto& [name, s] : j.at("states").items()) {
        StateDef def;
        def.entry = s.value("entry", std::string{});
        if (s.contains("machine"))
          def.child = std::make_shared<MachineDefinition>(from_json(s.at("machine"), name));
        m.states[name] = std::move(def);
      }
      for (const auto& t : j.value("transitions", nlohmann::json::array()))
        m.transitions.push_back({t.at("from").get<std::string>(), t.at("event").get<std::string>(),
                                 t.at("to").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw InvalidMachine(std::string("malformed machine definition: ") + e.what());
    }
    return m;
  }

  static MachineDefinition load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InvalidMachine("cannot open machine file " + file.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidMachine("machine file " + file.string() + " is not valid JSON");
    }
    return from_json(j, file.stem().string());
  }
};

/// Active state at each nesting level, outermost first.
using Configuration = std::vector<std::string>;

inline std::string to_string(const Configuration& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) out += (i ? "/" : "") + c[i];
  return out;
}

namespace detail {

inline std::set<std::string> alphabet(const MachineDefinition& root) {
  std::set<std::string> a(root.events.begin(), root.events.end());
  a.insert(kError);
  for (const auto& t : terminal_states()) a.insert(t);
  return a;
}

// Terminal states reachable inside `m` from its initial state.
inline std::set<std::string> reachable_terminals(const MachineDefinition& m) {
  std::set<std::string> seen{m.initial}, out;
  std::deque<std::string> todo{m.initial};
  if (!m.recovery.empty() && m.states.count(m.recovery) && seen.insert(m.recovery).second) todo.push_back(m.recovery);
  while (!todo.empty()) {
    auto s = todo.front();
    todo.pop_front();
    if (is_terminal(s)) {
      out.insert(s);
      continue;
    }
    for (const auto& t : m.transitions)
      if (t.from == s && seen.insert(t.to).second) todo.push_back(t.to);
  }
  return out;
}

inline void validate_into(const MachineDefinition& m, const std::set<std::string>& events, const std::string& path,
                          std::vector<std::string>& defects, std::set<const MachineDefinition*>& stack) {
  if (!stack.insert(&m).second) {
    defects.push_back("nesting cycle at " + path);
    return;
  }
  auto where = [&](const std::string& s) { return path.empty() ? s : path + "/" + s; };
  auto exists = [&](const std::string& s) { return m.states.count(s) > 0 || is_terminal(s); };

  if (m.states.empty()) defects.push_back("no states in " + (path.empty() ? m.name : path));
  if (!m.states.count(m.initial)) defects.push_back("unknown initial state: " + where(m.initial));
  if (m.recovery.empty())
    defects.push_back("missing recovery state in " + (path.empty() ? m.name : path));
  else if (!m.states.count(m.recovery))
    defects.push_back("unknown recovery state: " + where(m.recovery));
  for (const auto& name : m.states | std::views::keys)
    if (is_terminal(name)) defects.push_back("reserved state name: " + where(name));

  for (const auto& t : m.transitions) {
    if (!m.states.count(t.from)) defects.push_back("transition from unknown state: " + where(t.from));
    if (!exists(t.to)) defects.push_back("transition to unknown state: " + where(t.to));
    if (t.event == kError) defects.push_back("transition on reserved event 'error' from " + where(t.from));
    else if (!events.count(t.event)) defects.push_back("undeclared event '" + t.event + "' from " + where(t.from));
  }

  // reachability: transitions plus the recovery edge every state has
  std::set<std::string> reached{m.initial};
  std::deque<std::string> todo{m.initial};
  if (m.states.count(m.recovery) && reached.insert(m.recovery).second) todo.push_back(m.recovery);
  while (!todo.empty()) {
    auto s = todo.front();
    todo.pop_front();
    for (const auto& t : m.transitions)
      if (t.from == s && reached.insert(t.to).second) todo.push_back(t.to);
  }
  for (const auto& name : m.states | std::views::keys)
    if (!reached.count(name)) defects.push_back("unreachable: " + where(name));

  // every state must be able to reach a terminal
  for (const auto& name : m.states | std::views::keys) {
    std::set<std::string> seen{name};
    std::deque<std::string> q{name};
    bool ok = false;
    while (!q.empty() && !ok) {
      auto s = q.front();
      q.pop_front();
      if (is_terminal(s)) ok = true;
      for (const auto& t : m.transitions)
        if (t.from == s && seen.insert(t.to).second) q.push_back(t.to);
    }
    if (!ok) defects.push_back("no terminal path from " + where(name));
  }

  for (const auto& [name, def] : m.states) {
    if (!def.composite()) continue;
    for (const auto& outcome : reachable_terminals(*def.child))
      if (!m.find_transition(name, outcome))
        defects.push_back("unhandled child outcome '" + outcome + "' of " + where(name));
    validate_into(*def.child, events, where(name), defects, stack);
  }
  stack.erase(&m);
}

}  // namespace detail

/// Structural defects of `m`; empty when the machine is valid.
inline std::vector<std::string> validate(const MachineDefinition& m) {
  std::vector<std::string> defects;
  std::set<const MachineDefinition*> stack;
  detail::validate_into(m, detail::alphabet(m), "", defects, stack);
  return defects;
}

struct StepResult {
  Configuration config;
  std::vector<std::string> commands;
};

namespace detail {

inline Configuration enter(const MachineDefinition& m, const std::string& state, std::vector<std::string>& cmds) {
  if (is_terminal(state)) return {state};
  const auto& def = m.states.at(state);
  Configuration c{state};
  if (def.composite()) {
    auto sub = enter(*def.child, def.child->initial, cmds);
    c.insert(c.end(), sub.begin(), sub.end());
  } else if (!def.entry.empty()) {
    cmds.push_back(def.entry);
  }
  return c;
}

inline std::vector<const MachineDefinition*> chain(const MachineDefinition& root, const Configuration& c) {
  std::vector<const MachineDefinition*> out{&root};
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    const auto& def = out.back()->states.at(c[k]);
    if (!def.composite()) break;
    out.push_back(def.child.get());
  }
  return out;
}

inline Configuration transition_at(const std::vector<const MachineDefinition*>& machines, const Configuration& c,
                                   std::size_t level, const std::string& target, std::vector<std::string>& cmds) {
  Configuration next(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(level));
  auto tail = enter(*machines[level], target, cmds);
  next.insert(next.end(), tail.begin(), tail.end());
  return next;
}

}  // namespace detail

inline Configuration initial_configuration(const MachineDefinition& m, std::vector<std::string>& commands) {
  return detail::enter(m, m.initial, commands);
}

/// One deterministic step. Terminal configurations ignore every event;
/// declared events without a transition leave the configuration unchanged.
inline StepResult step(const MachineDefinition& m, const Configuration& config, const std::string& event) {
  StepResult r{config, {}};
  if (config.empty() || is_terminal(config.front())) return r;
  if (!detail::alphabet(m).count(event)) throw UndeclaredEvent("event '" + event + "' is not declared");
  const auto machines = detail::chain(m, config);
  const std::size_t depth = machines.size();

  if (event == kError) {
    for (std::size_t k = depth; k-- > 0;) {
      if (config[k] != machines[k]->recovery) {
        r.config = detail::transition_at(machines, config, k, machines[k]->recovery, r.commands);
        return r;
      }
    }
    r.config = detail::transition_at(machines, config, 0, m.recovery, r.commands);
    return r;
  }

  for (std::size_t k = depth; k-- > 0;) {
    const auto* t = machines[k]->find_transition(config[k], event);
    if (!t) continue;
    std::string target = t->to;
    std::size_t level = k;
    // A child finishing hands its outcome to the enclosing state.
    while (is_terminal(target) && level > 0) {
      --level;
      const auto* up = machines[level]->find_transition(config[level], target);
      if (!up) {
        target = machines[level]->recovery;
        break;
      }
      target = up->to;
    }
    r.config = detail::transition_at(machines, config, level, target, r.commands);
    return r;
  }
  return r;
}

/// Every configuration reachable from the initial one under declared events
/// and `error`, in discovery order.
inline std::vector<Configuration> reachable_configurations(const MachineDefinition& m) {
  std::vector<std::string> sink;
  std::vector<Configuration> out{initial_configuration(m, sink)};
  std::set<Configuration> seen(out.begin(), out.end());
  std::vector<std::string> events(m.events.begin(), m.events.end());
  events.push_back(kError);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (is_terminal(out[i].front())) continue;
    for (const auto& e : events) {
      auto next = step(m, out[i], e).config;
      if (seen.insert(next).second) out.push_back(std::move(next));
    }
  }
  return out;
}

/// True when some level of `c` sits in its machine's recovery state.
inline bool in_recovery(const MachineDefinition& m, const Configuration& c) {
  if (c.empty() || is_terminal(c.front())) return false;
  const auto machines = detail::chain(m, c);
  for (std::size_t k = 0; k < machines.size() && k < c.size(); ++k)
    if (!machines[k]->recovery.empty() && c[k] == machines[k]->recovery) return true;
  return false;
}

/// Reachable non-terminal configurations from which a single `error` does
/// not land in a recovery state. Empty for a well-formed machine.
inline std::vector<Configuration> recovery_violations(const MachineDefinition& m) {
  std::vector<Configuration> bad;
  for (const auto& c : reachable_configurations(m)) {
    if (is_terminal(c.front())) continue;
    if (!in_recovery(m, step(m, c, kError).config)) bad.push_back(c);
  }
  return bad;
}

/// Thread-safe FIFO feeding events to `run`.
class EventQueue {
 public:
  void push(std::string e) {
    std::lock_guard lock(mu_);
    q_.push_back(std::move(e));
  }
  std::optional<std::string> try_pop() {
    std::lock_guard lock(mu_);
    if (q_.empty()) return std::nullopt;
    auto e = std::move(q_.front());
    q_.pop_front();
    return e;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return q_.size();
  }

 private:
  mutable std::mutex mu_;
  std::deque<std::string> q_;
};

using EventSource = std::function<std::optional<std::string>()>;
using CommandSink = std::function<void(const std::string& command)>;
using StepObserver = std::function<void(const Configuration& from, const std::string& event, const StepResult&)>;

struct RunOptions {
  std::size_t max_steps = 10'000;
  StepObserver observer;
};

/// Pumps events until the machine reaches a terminal state and returns it.
/// Every poll of the source counts toward `max_steps`.
inline std::string run(const MachineDefinition& m, const EventSource& source, const CommandSink& sink,
                       const RunOptions& opts = {}) {
  std::vector<std::string> cmds;
  Configuration config = initial_configuration(m, cmds);
  for (const auto& c : cmds) sink(c);
  std::size_t steps = 0;
  while (!is_terminal(config.front())) {
    if (++steps > opts.max_steps)
      throw StepLimitExceeded("machine '" + m.name + "' did not terminate within " +
                              std::to_string(opts.max_steps) + " steps");
    auto e = source();
    if (!e) continue;
    auto r = step(m, config, *e);
    if (opts.observer) opts.observer(config, *e, r);
    config = r.config;
    for (const auto& c : r.commands) sink(c);
  }
  return config.front();
}

}  // namespace robostack::hfsm
