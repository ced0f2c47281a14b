#pragma once

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/app/session.hpp"
#include "robostack/hfsm/hfsm.hpp"

namespace robostack::app {

namespace fs = std::filesystem;

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitMismatch = 1, kExitFailure = 2, kExitAborted = 3, kExitUsage = 64 };

/// Directory holding bundled worlds, grammars, machines and scenarios.
/// ROBOSTACK_FIXTURES overrides the build-time default.
inline fs::path fixtures_dir() {
  if (const char* env = std::getenv("ROBOSTACK_FIXTURES"); env && *env) return env;
#ifdef ROBOSTACK_DATA_DIR
  return ROBOSTACK_DATA_DIR;
#else
  return "data";
#endif
}

/// Resolves `ref` against `base` first, then the fixtures directory.
inline fs::path resolve_path(const std::string& ref, const fs::path& base, const std::string& subdir = "") {
  fs::path p(ref);
  if (p.is_absolute()) return p;
  for (const fs::path& root : {base, fixtures_dir() / subdir, fixtures_dir()}) {
    auto candidate = root / p;
    if (fs::exists(candidate)) return candidate;
  }
  return base / p;
}

inline fs::path default_grammar() { return fixtures_dir() / "grammar" / "gpsr.json"; }

/// Resolves a machine reference: a file path, or a bundled machine name.
inline fs::path machine_path(const std::string& ref, const fs::path& base) {
  fs::path p(ref);
  if (p.extension() != ".json") p += ".json";
  return resolve_path(p.string(), base, "machines");
}

struct Scenario {
  fs::path file;
  fs::path world;
  fs::path grammar;
  std::vector<std::string> commands;
  std::optional<fs::path> machine;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> expected;

  static Scenario load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw SchemaError("cannot open scenario file " + file.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("scenario " + file.string() + " is not valid JSON");
    }
    const auto base = file.parent_path();
    Scenario s;
    s.file = file;
    try {
      s.world = resolve_path(j.at("world").get<std::string>(), base, "worlds");
      s.grammar = j.contains("grammar") ? resolve_path(j["grammar"].get<std::string>(), base, "grammar")
                                        : default_grammar();
      s.commands = j.value("commands", std::vector<std::string>{});
      if (j.contains("machine")) s.machine = machine_path(j["machine"].get<std::string>(), base);
      if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("expected")) s.expected = j["expected"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("scenario " + file.string() + ": " + e.what());
    }
    if (!fs::exists(s.world)) throw SchemaError("world file " + s.world.string() + " does not exist");
    if (!fs::exists(s.grammar)) throw SchemaError("grammar file " + s.grammar.string() + " does not exist");
    if (s.machine && !fs::exists(*s.machine)) throw SchemaError("machine " + s.machine->string() + " does not exist");
    if (!s.machine && s.commands.empty()) throw SchemaError("scenario needs commands or a machine");
    const auto g = grammar::Grammar::load(s.grammar);
    for (const auto& c : s.commands) {
      try {
        g.parse(c);
      } catch (const grammar::ParseError& e) {
        throw SchemaError("scenario command '" + c + "' does not parse: " + e.what());
      }
    }
    return s;
  }
};

/// Builds a session for `world` with an optional seed override.
inline std::unique_ptr<Session> make_session(const fs::path& world, const fs::path& grammar_file,
                                             std::optional<std::uint64_t> seed) {
  auto spec = sim::parse_world([&] {
    std::ifstream in(world);
    if (!in) throw SchemaError("cannot open world file " + world.string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("world file " + world.string() + " is not valid JSON");
    }
  }());
  if (seed) spec.seed = *seed;
  return std::make_unique<Session>(std::move(spec), grammar::Grammar::load(grammar_file));
}

/// Executes HFSM commands against a session and feeds the resulting events
/// back. Commands: `listen`, `executor.execute`, `executor.store-next`,
/// `skill:<action>`, `say:<text>`.
class MachineDriver {
 public:
  MachineDriver(Session& s, std::vector<std::string> commands) : session_(s), pending_(commands.begin(), commands.end()) {}

  std::string run(const hfsm::MachineDefinition& m, hfsm::RunOptions opts = {}) {
    auto defects = hfsm::validate(m);
    if (!defects.empty()) throw InvalidMachine("machine '" + m.name + "' is invalid: " + defects.front());
    auto source = [this]() { return queue_.try_pop(); };
    auto sink = [this](const std::string& c) { handle(c); };
    auto user = opts.observer;
    opts.observer = [this, user](const hfsm::Configuration& from, const std::string& e, const hfsm::StepResult& r) {
      session_log({{"machine", hfsm::to_string(from)}, {"event", e}, {"next", hfsm::to_string(r.config)}});
      if (user) user(from, e, r);
    };
    return hfsm::run(m, source, sink, opts);
  }

  const std::vector<CommandOutcome>& outcomes() const { return outcomes_; }

 private:
  void session_log(const nlohmann::json& j) { session_.note_json(j); }

  void handle(const std::string& cmd) {
    if (cmd == "listen") {
      if (pending_.empty()) return queue_.push("commands-exhausted");
      auto text = pending_.front();
      pending_.pop_front();
      try {
        frame_ = session_.grammar().parse(text);
        session_.note_json({{"command", text}, {"frame", frame_->to_json()}});
        queue_.push("command-parsed");
      } catch (const grammar::ParseError& e) {
        session_.note_json({{"command", text}, {"result", "parse-error"}, {"message", e.what()}});
        queue_.push("parse-error");
      }
    } else if (cmd == "executor.execute") {
      if (!frame_) return queue_.push("task-failed");
      push_task(session_.execute(*frame_));
    } else if (cmd == "executor.store-next") {
      auto next = next_unstored();
      if (!next) return queue_.push("nothing-left");
      const auto& cls = session_.kb().entity(*next).cls;
      grammar::CommandFrame f;
      f.task = grammar::Task::Store;
      f.object = kb::ObjectDescriptor{cls, kb::Determiner::Definite, *next};
      push_task(session_.execute(f));
    } else if (cmd.rfind("skill:", 0) == 0) {
      auto o = session_.skill(planner::Action::parse(cmd.substr(6)));
      queue_.push(o.status == executor::SkillStatus::Succeeded ? "skill-succeeded"
                  : o.status == executor::SkillStatus::Preempted ? "task-aborted"
                                                                 : "skill-failed");
    } else if (cmd.rfind("say:", 0) == 0) {
      session_.note(cmd.substr(4));
      queue_.push("said");
    } else {
      throw InvalidMachine("unknown machine command '" + cmd + "'");
    }
  }

  void push_task(CommandOutcome o) {
    const auto status = o.status;
    outcomes_.push_back(std::move(o));
    queue_.push(status == CommandStatus::Succeeded ? "task-succeeded"
                : status == CommandStatus::Aborted ? "task-aborted"
                                                   : "task-failed");
  }

  // Known objects resting somewhere other than a storage location, by id.
  std::optional<kb::EntityId> next_unstored() const {
    auto& base = session_.kb();
    for (const auto& e : base.entities_of_class("object")) {
      auto loc = base.location_of(e.id, false);
      if (!loc || !base.ontology().is_a(base.entity(*loc).cls, "placement")) continue;
      if (base.ontology().is_a(base.entity(*loc).cls, "storage")) continue;
      return e.id;
    }
    return std::nullopt;
  }

  Session& session_;
  std::deque<std::string> pending_;
  std::optional<grammar::CommandFrame> frame_;
  hfsm::EventQueue queue_;
  std::vector<CommandOutcome> outcomes_;
};

struct ScenarioResult {
  std::string status;  // succeeded | failed | aborted
  std::vector<std::string> log;
  std::vector<CommandOutcome> outcomes;
  std::optional<std::string> expected;

  bool matched() const { return !expected || *expected == status; }

  int exit_code() const {
    if (expected) return matched() ? kExitOk : kExitMismatch;
    if (status == "succeeded") return kExitOk;
    if (status == "aborted") return kExitAborted;
    return kExitFailure;
  }
};

/// Runs a scenario to completion. Without a machine every command runs in
/// order; the status is that of the first command that did not succeed.
inline ScenarioResult run_scenario(const Scenario& sc, const Session::LogSink& tee = {}) {
  ScenarioResult r;
  r.expected = sc.expected;
  auto owned = make_session(sc.world, sc.grammar, sc.seed);
  Session& session = *owned;
  session.set_log_sink([&](const std::string& line) {
    r.log.push_back(line);
    if (tee) tee(line);
  });
  if (sc.machine) {
    auto m = hfsm::MachineDefinition::load(*sc.machine);
    MachineDriver driver(session, sc.commands);
    r.status = driver.run(m);
    r.outcomes = driver.outcomes();
  } else {
    r.status = "succeeded";
    for (const auto& c : sc.commands) {
      auto o = session.command(c);
      if (o.status != CommandStatus::Succeeded && r.status == "succeeded")
        r.status = o.status == CommandStatus::Aborted ? "aborted" : "failed";
      r.outcomes.push_back(std::move(o));
    }
  }
  return r;
}

}  // namespace robostack::app
