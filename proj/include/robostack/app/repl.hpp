#pragma once

#include <chrono>
#include <future>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

#include <poll.h>
#include <unistd.h>

#include "robostack/app/session.hpp"

namespace robostack::app {

struct ReplOptions {
  bool interactive = false;  // watch stdin for :abort while a command runs
  std::string prompt = "> ";
};

namespace detail {

inline std::string format_event(const executor::Event& e) {
  std::ostringstream os;
  os << "  [" << std::fixed << std::setprecision(2) << std::setw(7) << e.t << "s] " << std::setw(10) << std::left
     << to_string(e.phase) << std::right << ' ' << (e.action.empty() ? "-" : e.action) << " -> " << e.outcome;
  if (e.hypothesis) os << "  {" << *e.hypothesis << "}";
  return os.str();
}

// A line from stdin if one is ready within `wait`.
inline std::optional<std::string> poll_stdin(std::chrono::milliseconds wait) {
  if (std::cin.rdbuf()->in_avail() <= 0) {
    pollfd fd{STDIN_FILENO, POLLIN, 0};
    if (::poll(&fd, 1, static_cast<int>(wait.count())) <= 0) return std::nullopt;
  }
  std::string line;
  if (!std::getline(std::cin, line)) return std::nullopt;
  return line;
}

inline void print_kb(kb::KnowledgeBase& base, std::ostream& out) {
  for (const auto& t : base.all_triples(true))
    out << "  " << t.str() << (base.is_hypothetical(t.subject) ? "  [hypothetical]" : "") << '\n';
  for (const auto& a : base.assumption_ids()) {
    const auto& as = base.assumption(a);
    out << "  assumption " << a << ": " << as.description << " (" << kb::to_string(as.status) << ")\n";
  }
}

}  // namespace detail

/// Reads utterances from `in` until EOF or `:quit`. Meta-commands: `:kb`
/// prints the knowledge base, `:abort` cancels the running command, `:help`.
inline int repl(Session& session, std::istream& in, std::ostream& out, const ReplOptions& opts = {}) {
  std::mutex out_mu;
  session.set_event_listener([&](const executor::Event& e) {
    std::lock_guard lock(out_mu);
    out << detail::format_event(e) << '\n' << std::flush;
  });
  auto say = [&](const std::string& s) {
    std::lock_guard lock(out_mu);
    out << s << '\n' << std::flush;
  };

  std::string line;
  for (;;) {
    {
      std::lock_guard lock(out_mu);
      out << opts.prompt << std::flush;
    }
    if (!std::getline(in, line)) break;
    const auto text = grammar::detokenize(grammar::tokenize(line));
    if (text.empty()) continue;
    if (line == ":quit" || line == ":q") break;
    if (line == ":help") {
      say("type a command, e.g. \"bring me an apple from the kitchen\"; meta-commands: :kb :abort :quit");
      continue;
    }
    if (line == ":kb") {
      std::lock_guard lock(out_mu);
      detail::print_kb(session.kb(), out);
      continue;
    }
    if (line == ":abort") {
      say("nothing is running");
      continue;
    }
    if (line.front() == ':') {
      say("unknown meta-command " + line);
      continue;
    }

    if (auto frame = [&]() -> std::optional<grammar::CommandFrame> {
          try {
            return session.grammar().parse(line);
          } catch (const grammar::ParseError&) {
            return std::nullopt;
          }
        }())
      say("frame: " + frame->to_json().dump());

    auto running = std::async(std::launch::async, [&] { return session.command(line); });
    while (running.wait_for(std::chrono::milliseconds(opts.interactive ? 0 : 20)) != std::future_status::ready) {
      if (!opts.interactive) continue;
      if (auto extra = detail::poll_stdin(std::chrono::milliseconds(50))) {
        if (*extra == ":abort")
          session.abort();
        else
          say("busy; type :abort to cancel");
      }
    }
    const auto outcome = running.get();
    switch (outcome.status) {
      case CommandStatus::ParseError: say("parse error: " + outcome.message); break;
      case CommandStatus::Rejected: say("rejected: " + outcome.message); break;
      default:
        say(outcome.message);
        if (outcome.result && outcome.result->diagnosis) say(outcome.result->diagnosis->to_json().dump(2));
    }
  }
  session.set_event_listener({});
  return 0;
}

}  // namespace robostack::app
