#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/executor/skills.hpp"
#include "robostack/kb/knowledge_base.hpp"
#include "robostack/planner/planner.hpp"

namespace robostack::executor {

using planner::Domain;
using planner::Goal;
using planner::Plan;
using planner::State;

enum class Phase { Idle, Executing, Replanning, Diagnosing, Succeeded, Failed, Aborted };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Executing: return "executing";
    case Phase::Replanning: return "replanning";
    case Phase::Diagnosing: return "diagnosing";
    case Phase::Succeeded: return "succeeded";
    case Phase::Failed: return "failed";
    case Phase::Aborted: return "aborted";
  }
  return "?";
}

/// Legal phase changes of one execution.
inline bool legal_transition(Phase from, Phase to) {
  switch (from) {
    case Phase::Idle: return to == Phase::Executing || to == Phase::Succeeded || to == Phase::Diagnosing;
    case Phase::Executing:
      return to == Phase::Executing || to == Phase::Replanning || to == Phase::Succeeded || to == Phase::Failed ||
             to == Phase::Aborted;
    case Phase::Replanning: return to == Phase::Executing || to == Phase::Diagnosing;
    case Phase::Diagnosing: return to == Phase::Failed;
    default: return false;
  }
}

struct ExecutionStatus {
  Phase phase = Phase::Idle;
  std::size_t action_index = 0;
  std::optional<std::string> committed;
  std::size_t attempts = 0;
};

/// One line of the execution log. `t` is simulated seconds since the start.
struct Event {
  double t = 0.0;
  Phase phase = Phase::Idle;
  std::string action;
  std::string outcome;
  std::optional<std::string> hypothesis;
  std::optional<planner::Action> dispatched;  // set for skill dispatches
  Observation observed;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"t", t}, {"phase", to_string(phase)}, {"action", action}, {"outcome", outcome}};
    j["hypothesis"] = hypothesis ? nlohmann::json(*hypothesis) : nlohmann::json(nullptr);
    if (!observed.empty()) j["observed"] = observed.to_json();
    return j;
  }
};

inline std::string to_json_lines(const std::vector<Event>& log) {
  std::string out;
  for (const auto& e : log) out += e.to_json().dump() + "\n";
  return out;
}

struct FailureReport {
  std::string action;
  std::string error;
  std::optional<std::string> refuted;
};

enum class ExecutionStatusCode { Succeeded, Failed, Aborted };

inline const char* to_string(ExecutionStatusCode c) {
  switch (c) {
    case ExecutionStatusCode::Succeeded: return "succeeded";
    case ExecutionStatusCode::Failed: return "failed";
    case ExecutionStatusCode::Aborted: return "aborted";
  }
  return "?";
}

struct ExecutionResult {
  ExecutionStatusCode status = ExecutionStatusCode::Succeeded;
  State final_state;
  std::optional<std::string> confirmed;  // hypothesis
  std::optional<kb::DiagnosisReport> diagnosis;
  std::optional<FailureReport> failure;
  std::vector<Event> log;
  std::size_t plans = 0;
  std::size_t refutations = 0;
};

/// Applies a successful dispatch to the executor's state: symbolic effects
/// for most skills, revealed instances for find, then relocations.
inline State apply_outcome(const State& s, const planner::Action& a, const Observation& obs, const Domain& d) {
  State next = s;
  if (a.kind == planner::ActionKind::Find) {
    if (obs.revealed) {
      next.facts.erase({a.args.at(0), planner::kUnverified, "yes"});
      next.set_location(obs.revealed->second, a.args.at(1));
    }
  } else {
    next = planner::apply(a, s, d);
  }
  for (const auto& [e, loc] : obs.relocated) next.set_location(e, loc);
  return next;
}

/// Rebuilds the final state from `s0` and the successful dispatches in `log`.
inline State replay(const State& s0, const std::vector<Event>& log, const Domain& d) {
  State s = s0;
  for (const auto& e : log)
    if (e.dispatched && e.outcome == "succeeded") s = apply_outcome(s, *e.dispatched, e.observed, d);
  return s;
}

struct ExecutorOptions {
  std::size_t retries = 1;  // extra attempts for non-sensing failures
  planner::SearchOptions search;
  std::chrono::microseconds poll{200};
};

// Plan -> dispatch -> monitor loop. A failed find refutes the committed
// hypothesis and triggers a replan; once an assumption runs out of
// hypotheses the loop diagnoses it and fails.
class Executor {
 public:
  using Listener = std::function<void(const Event&)>;

  Executor(kb::KnowledgeBase& base, SkillSet& skills, ExecutorOptions opts = {})
      : kb_(base), skills_(skills), opts_(opts) {}

  void set_listener(Listener l) { listener_ = std::move(l); }

  const ExecutionStatus& status() const { return status_; }

  /// Requests cancellation of the running execution. No effect when idle;
  /// repeated calls are harmless.
  void abort() {
    std::lock_guard lock(mu_);
    if (!running_) return;
    abort_requested_ = true;
    if (current_stop_) current_stop_->request_stop();
  }

  /// Runs one skill on a worker thread while this thread watches for aborts.
  SkillOutcome dispatch(const planner::Action& a) {
    if (!skills_.provides(a.kind)) throw SkillUnavailable("no skill for " + std::string(planner::to_string(a.kind)));
    std::stop_source source;
    {
      std::lock_guard lock(mu_);
      if (abort_requested_) source.request_stop();
      current_stop_ = &source;
    }
    auto fut = std::async(std::launch::async, [&, token = source.get_token()] { return skills_.run(a, token); });
    while (fut.wait_for(opts_.poll) != std::future_status::ready) {
      if (abort_requested_) source.request_stop();
    }
    {
      std::lock_guard lock(mu_);
      current_stop_ = nullptr;
    }
    return fut.get();
  }

  ExecutionResult execute(const Goal& goal, const State& s0) {
    {
      std::lock_guard lock(mu_);
      running_ = true;
      abort_requested_ = false;
    }
    struct Reset {
      Executor& self;
      ~Reset() {
        std::lock_guard lock(self.mu_);
        self.running_ = false;
        self.abort_requested_ = false;
      }
    } reset{*this};
    return run(goal, s0);
  }

 private:
  ExecutionResult run(const Goal& goal, const State& s0) {
    ExecutionResult result;
    result.final_state = s0;
    status_ = {};
    ticks_ = 0;
    Domain domain = planner::domain_for(goal, kb_);

    auto bound_goal = [&](const Plan& p) {
      return p.committed_object ? goal.bind(kb_.resolve(*p.committed_object)) : goal;
    };

    if (!goal.references_object_var() && planner::satisfied(goal, s0, domain)) {
      status_.phase = Phase::Succeeded;
      return result;
    }

    State state = s0;
    Plan current;
    auto finish = [&](ExecutionStatusCode code, Phase phase) {
      set_phase(phase);
      log(result, phase, "", to_string(code), status_.committed, std::nullopt, {});
      result.status = code;
      result.final_state = state;
      return result;
    };
    auto diagnose = [&](const std::string& assumption) {
      set_phase(Phase::Diagnosing);
      result.diagnosis = kb_.diagnose(assumption);
      log(result, Phase::Diagnosing, "diagnose(" + assumption + ")", result.diagnosis->conclusion, std::nullopt,
          std::nullopt, {});
      return finish(ExecutionStatusCode::Failed, Phase::Failed);
    };

    set_phase(Phase::Executing);
    try {
      current = planner::plan(state, goal, kb_, opts_.search);
    } catch (const NoPlan& e) {
      if (goal.assumption && kb_.open_hypotheses(*goal.assumption).empty()) {
        set_phase(Phase::Replanning);
        return diagnose(*goal.assumption);
      }
      result.failure = FailureReport{"plan", e.what(), std::nullopt};
      return finish(ExecutionStatusCode::Failed, Phase::Failed);
    }
    on_plan(result, current, Phase::Executing);

    std::size_t i = 0;
    while (i < current.actions.size()) {
      status_.action_index = i;
      if (abort_requested_) return finish(ExecutionStatusCode::Aborted, Phase::Aborted);
      planner::Action a = current.actions[i];
      for (auto& arg : a.args) arg = kb_.resolve(arg);

      SkillOutcome out;
      std::size_t attempt = 0;
      for (;;) {
        status_.attempts = ++attempt;
        out = dispatch(a);
        ticks_ += out.ticks;
        log(result, Phase::Executing, a.str(), out.str(), status_.committed, a, out.observed);
        if (out.status != SkillStatus::Failed || a.kind == planner::ActionKind::Find || attempt > opts_.retries)
          break;
      }

      if (out.status == SkillStatus::Preempted) return finish(ExecutionStatusCode::Aborted, Phase::Aborted);
      if (out.status == SkillStatus::Succeeded) {
        state = apply_outcome(state, a, out.observed, domain);
        ++i;
        continue;
      }

      if (a.kind != planner::ActionKind::Find || !current.committed) {
        result.failure = FailureReport{a.str(), out.error, std::nullopt};
        return finish(ExecutionStatusCode::Failed, Phase::Failed);
      }

      // Sensing failure: the committed hypothesis is wrong.
      const std::string failed = *current.committed;
      set_phase(Phase::Replanning);
      ++result.refutations;
      std::variant<Plan, planner::DiagnosisTrigger> next;
      try {
        next = planner::replan_after_failure(state, goal, kb_, current, failed, opts_.search);
      } catch (const NoPlan& e) {
        log(result, Phase::Replanning, "refute(" + failed + ")", "refuted", failed, std::nullopt, {});
        result.failure = FailureReport{a.str(), e.what(), failed};
        set_phase(Phase::Executing);
        return finish(ExecutionStatusCode::Failed, Phase::Failed);
      }
      log(result, Phase::Replanning, "refute(" + failed + ")", "refuted", failed, std::nullopt, {});
      if (auto* trigger = std::get_if<planner::DiagnosisTrigger>(&next)) return diagnose(trigger->assumption);
      current = std::get<Plan>(std::move(next));
      set_phase(Phase::Executing);
      on_plan(result, current, Phase::Executing);
      i = 0;
    }

    if (!planner::satisfied(bound_goal(current), state, domain)) {
      result.failure = FailureReport{"monitor", "goal not satisfied after plan", std::nullopt};
      return finish(ExecutionStatusCode::Failed, Phase::Failed);
    }
    if (current.committed && kb_.hypothesis(*current.committed).status == kb::HypothesisStatus::Confirmed)
      result.confirmed = current.committed;
    return finish(ExecutionStatusCode::Succeeded, Phase::Succeeded);
  }

  void set_phase(Phase p) { status_.phase = p; }

  void on_plan(ExecutionResult& result, const Plan& p, Phase phase) {
    ++result.plans;
    status_.committed = p.committed;
    std::string summary = std::to_string(p.actions.size()) + " actions, cost " + format_cost(p.cost);
    log(result, phase, "plan", summary, p.committed, std::nullopt, {});
  }

  static std::string format_cost(double c) {
    nlohmann::json j = c;
    return j.dump();
  }

  void log(ExecutionResult& result, Phase phase, std::string action, std::string outcome,
           std::optional<std::string> hypothesis, std::optional<planner::Action> dispatched, Observation observed) {
    Event e{static_cast<double>(ticks_) * skills_.tick_seconds(), phase, std::move(action), std::move(outcome),
            std::move(hypothesis), std::move(dispatched), std::move(observed)};
    if (listener_) listener_(e);
    result.log.push_back(std::move(e));
  }

  kb::KnowledgeBase& kb_;
  SkillSet& skills_;
  ExecutorOptions opts_;
  ExecutionStatus status_;
  Listener listener_;
  std::uint64_t ticks_ = 0;

  std::mutex mu_;
  bool running_ = false;
  std::atomic<bool> abort_requested_ = false;
  std::stop_source* current_stop_ = nullptr;
};

}  // namespace robostack::executor
