#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/executor/executor.hpp"
#include "robostack/grammar/command_goal.hpp"
#include "robostack/grammar/grammar.hpp"
#include "robostack/sim/sim_world.hpp"
#include "robostack/sim/world.hpp"

namespace robostack::app {

enum class CommandStatus { Succeeded, Failed, Aborted, ParseError, Rejected };

inline const char* to_string(CommandStatus s) {
  switch (s) {
    case CommandStatus::Succeeded: return "succeeded";
    case CommandStatus::Failed: return "failed";
    case CommandStatus::Aborted: return "aborted";
    case CommandStatus::ParseError: return "parse-error";
    case CommandStatus::Rejected: return "rejected";
  }
  return "?";
}

struct CommandOutcome {
  CommandStatus status = CommandStatus::Succeeded;
  std::optional<grammar::CommandFrame> frame;
  std::optional<executor::ExecutionResult> result;
  std::string message;  // one-line human summary
};

/// One robot in one simulated world: parses commands, turns them into goals,
/// and runs the executor against the simulator. Every observable step is
/// written to the log sink as a JSON line, so any front end driving a
/// session with the same inputs produces the same log.
class Session {
 public:
  using LogSink = std::function<void(const std::string& line)>;
  using EventListener = std::function<void(const executor::Event&)>;

  Session(sim::WorldSpec spec, grammar::Grammar g, executor::ExecutorOptions opts = {})
      : grammar_(std::move(g)),
        kb_(std::make_unique<kb::KnowledgeBase>(sim::seed_knowledge_base(spec))),
        world_(std::make_unique<sim::SimWorld>(std::move(spec), *kb_)),
        executor_(std::make_unique<executor::Executor>(*kb_, *world_, opts)) {
    executor_->set_listener([this](const executor::Event& e) {
      emit(e.to_json());
      if (listener_) listener_(e);
    });
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void set_log_sink(LogSink sink) { sink_ = std::move(sink); }
  void set_event_listener(EventListener l) { listener_ = std::move(l); }

  kb::KnowledgeBase& kb() { return *kb_; }
  sim::SimWorld& world() { return *world_; }
  executor::Executor& executor() { return *executor_; }
  const grammar::Grammar& grammar() const { return grammar_; }

  void abort() { executor_->abort(); }

  /// Parses and executes one utterance.
  CommandOutcome command(const std::string& utterance) {
    emit({{"command", utterance}});
    CommandOutcome out;
    try {
      out.frame = grammar_.parse(utterance);
    } catch (const grammar::ParseError& e) {
      out.status = CommandStatus::ParseError;
      out.message = e.what();
      emit({{"result", to_string(out.status)}, {"message", out.message}, {"position", e.position()}});
      return out;
    }
    emit({{"frame", out.frame->to_json()}});
    return finish(execute_frame(*out.frame, out));
  }

  /// Executes an already-parsed frame.
  CommandOutcome execute(const grammar::CommandFrame& frame) {
    CommandOutcome out;
    out.frame = frame;
    emit({{"frame", frame.to_json()}});
    return finish(execute_frame(frame, out));
  }

  /// Executes a goal directly (scripted behaviours).
  CommandOutcome execute(const planner::Goal& goal, const std::string& describe) {
    CommandOutcome out;
    emit({{"goal", goal.str()}});
    run_goal(goal, std::nullopt, out);
    if (out.status == CommandStatus::Succeeded) out.message = describe;
    return finish(std::move(out));
  }

  /// Dispatches one skill outside any plan (HFSM scripts).
  executor::SkillOutcome skill(const planner::Action& a) {
    auto o = executor_->dispatch(a);
    nlohmann::json j = {{"skill", a.str()}, {"outcome", o.str()}, {"t", o.ticks * world_->tick_seconds()}};
    if (!o.observed.empty()) j["observed"] = o.observed.to_json();
    emit(j);
    return o;
  }

  void note(const std::string& text) { emit({{"say", text}}); }
  void note_json(const nlohmann::json& j) { emit(j); }

 private:
  CommandOutcome& execute_frame(const grammar::CommandFrame& frame, CommandOutcome& out) {
    planner::Goal goal;
    try {
      goal = grammar::frame_to_goal(frame, *kb_);
    } catch (const Error& e) {
      out.status = CommandStatus::Rejected;
      out.message = std::string(e.kind()) + ": " + e.what();
      return out;
    }
    emit({{"goal", goal.str()}, {"assumption", goal.assumption ? nlohmann::json(*goal.assumption) : nlohmann::json(nullptr)}});
    run_goal(goal, frame, out);
    return out;
  }

  void run_goal(const planner::Goal& goal, const std::optional<grammar::CommandFrame>& frame, CommandOutcome& out) {
    auto result = executor_->execute(goal, planner::initial_state(*kb_));
    switch (result.status) {
      case executor::ExecutionStatusCode::Succeeded:
        out.status = CommandStatus::Succeeded;
        if (frame) out.message = success_message(*frame, goal, result);
        break;
      case executor::ExecutionStatusCode::Aborted:
        out.status = CommandStatus::Aborted;
        out.message = "aborted";
        break;
      case executor::ExecutionStatusCode::Failed:
        out.status = CommandStatus::Failed;
        if (result.diagnosis) {
          const auto& d = *result.diagnosis;
          out.message = d.invalid ? "assumption invalid: no " + d.assumption : "diagnosis: " + d.conclusion;
        } else if (result.failure) {
          out.message = "failed: " + result.failure->action + ": " + result.failure->error;
        } else {
          out.message = "failed";
        }
        break;
    }
    out.result = std::move(result);
  }

  CommandOutcome finish(CommandOutcome out) {
    nlohmann::json j = {{"result", to_string(out.status)}, {"message", out.message}};
    if (out.result && out.result->diagnosis) j["diagnosis"] = out.result->diagnosis->to_json();
    emit(j);
    return out;
  }

  // Object the goal ended up being about, following confirmation aliases.
  std::string bound_object(const planner::Goal& goal, const executor::ExecutionResult& r) const {
    const auto& subject = goal.targets.front().subject;
    if (subject != planner::kObjectVar) return kb_->resolve(subject);
    if (r.confirmed) return kb_->resolve(kb_->hypothesis(*r.confirmed).claim.subject);
    return subject;
  }

  std::string success_message(const grammar::CommandFrame& f, const planner::Goal& goal,
                               const executor::ExecutionResult& r) const {
    using grammar::Task;
    switch (f.task) {
      case Task::Bring: return "delivered " + bound_object(goal, r) + " to " + *f.person;
      case Task::Go: return "arrived in " + *f.destination;
      case Task::FindObject: return "found " + bound_object(goal, r);
      case Task::FindPerson: return "found " + *f.person;
      case Task::Guide: return "guided " + *f.person + " to " + *f.destination;
      case Task::Follow: return "followed " + *f.person;
      case Task::Say: return "told " + *f.person + " " + *f.payload;
      case Task::Store: return "stored " + bound_object(goal, r) + " at " + goal.targets.front().object;
    }
    return "succeeded";
  }

  void emit(const nlohmann::json& j) {
    if (sink_) sink_(j.dump());
  }

  grammar::Grammar grammar_;
  std::unique_ptr<kb::KnowledgeBase> kb_;
  std::unique_ptr<sim::SimWorld> world_;
  std::unique_ptr<executor::Executor> executor_;
  LogSink sink_;
  EventListener listener_;
};

}  // namespace robostack::app
