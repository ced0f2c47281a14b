#include <random>

#include <gtest/gtest.h>

#include "robostack/app/scenario.hpp"
#include "robostack/hfsm/hfsm.hpp"

using namespace robostack;
using hfsm::Configuration;
using hfsm::MachineDefinition;
using nlohmann::json;

namespace {

MachineDefinition bundled(const std::string& name) {
  return MachineDefinition::load(app::fixtures_dir() / "machines" / (name + ".json"));
}

const std::vector<std::string> kMachines{"gpsr", "help_me_carry", "restaurant", "storing_groceries"};

json flat_machine() {
  return json::parse(R"({
    "name": "flat", "events": ["go", "fail"], "initial": "A", "recovery": "R",
    "states": {"A": {"entry": "skill:a"}, "B": {"entry": "skill:b"}, "R": {"entry": "say:sorry"}},
    "transitions": [{"from": "A", "event": "go", "to": "B"}, {"from": "B", "event": "go", "to": "succeeded"},
                    {"from": "B", "event": "fail", "to": "R"}, {"from": "R", "event": "go", "to": "failed"}]
  })");
}

bool mentions(const std::vector<std::string>& defects, const std::string& needle) {
  for (const auto& d : defects)
    if (d.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Hfsm, BundledMachinesValidate) {
  for (const auto& name : kMachines) EXPECT_TRUE(hfsm::validate(bundled(name)).empty()) << name;
}

TEST(Hfsm, ValidateReportsDefects) {
  auto defects_after = [](auto mutate) {
    auto j = flat_machine();
    mutate(j);
    return hfsm::validate(MachineDefinition::from_json(j));
  };
  EXPECT_TRUE(defects_after([](json&) {}).empty());
  EXPECT_TRUE(mentions(defects_after([](json& j) { j.erase("recovery"); }), "missing recovery"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["recovery"] = "Q"; }), "unknown recovery"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["initial"] = "Q"; }), "unknown initial"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["transitions"][0]["to"] = "Q"; }), "unknown state"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["transitions"][0]["event"] = "jump"; }), "undeclared event"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["transitions"][0]["event"] = "error"; }), "reserved event"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["states"]["Z"] = {{"entry", "skill:z"}}; }), "unreachable: Z"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["transitions"][3]["to"] = "R"; }), "no terminal path from R"));
  EXPECT_TRUE(mentions(defects_after([](json& j) { j["states"]["failed"] = json::object(); }), "reserved state"));
}

TEST(Hfsm, UnhandledChildOutcome) {
  auto j = flat_machine();
  j["states"]["C"] = {{"machine", flat_machine()}};
  j["transitions"][1]["to"] = "C";
  j["transitions"].push_back({{"from", "C"}, {"event", "succeeded"}, {"to", "succeeded"}});
  auto defects = hfsm::validate(MachineDefinition::from_json(j));
  EXPECT_TRUE(mentions(defects, "unhandled child outcome 'failed' of C")) << ::testing::PrintToString(defects);
}

TEST(Hfsm, StepsThroughNestedMachine) {
  auto m = bundled("help_me_carry");
  std::vector<std::string> cmds;
  auto c = hfsm::initial_configuration(m, cmds);
  EXPECT_EQ(c, (Configuration{"MeetOperator"}));
  EXPECT_EQ(cmds, (std::vector<std::string>{"skill:navigate(elevator)"}));

  auto r = hfsm::step(m, c, "skill-succeeded");
  EXPECT_EQ(r.config, (Configuration{"FollowOperator"}));
  r = hfsm::step(m, r.config, "skill-succeeded");
  EXPECT_EQ(r.config, (Configuration{"CarryBag", "Pick"}));
  EXPECT_EQ(r.commands, (std::vector<std::string>{"skill:pick(bag-1)"}));

  // declared event without a transition: no change, no commands
  auto idle = hfsm::step(m, r.config, "said");
  EXPECT_EQ(idle.config, r.config);
  EXPECT_TRUE(idle.commands.empty());
  EXPECT_THROW(hfsm::step(m, r.config, "teleport"), UndeclaredEvent);

  // error goes to the innermost recovery first, then outward
  auto e1 = hfsm::step(m, r.config, "error");
  EXPECT_EQ(e1.config, (Configuration{"CarryBag", "Regrasp"}));
  auto e2 = hfsm::step(m, e1.config, "error");
  EXPECT_EQ(e2.config, (Configuration{"Recover"}));
  EXPECT_EQ(e2.commands, (std::vector<std::string>{"say:I could not carry the bag"}));

  // child outcome propagates to the parent's transition
  auto s = hfsm::step(m, r.config, "skill-succeeded");  // Return
  s = hfsm::step(m, s.config, "skill-succeeded");       // Drop
  s = hfsm::step(m, s.config, "skill-succeeded");
  EXPECT_EQ(s.config, (Configuration{"Announce"}));
  s = hfsm::step(m, s.config, "said");
  EXPECT_EQ(s.config, (Configuration{"succeeded"}));
  EXPECT_EQ(hfsm::step(m, s.config, "error").config, s.config);  // terminal absorbs everything
}

// From every reachable configuration, one error lands in a recovery state.
TEST(Hfsm, OneStepErrorRecoveryExhaustive) {
  for (const auto& name : kMachines) {
    auto m = bundled(name);
    EXPECT_GT(hfsm::reachable_configurations(m).size(), 1u) << name;
    EXPECT_TRUE(hfsm::recovery_violations(m).empty()) << name;
    for (const auto& c : hfsm::reachable_configurations(m)) {
      if (hfsm::is_terminal(c.front())) continue;
      EXPECT_TRUE(hfsm::in_recovery(m, hfsm::step(m, c, "error").config)) << name << " " << hfsm::to_string(c);
    }
  }
}

TEST(Hfsm, RunTerminatesOrHitsStepLimit) {
  auto m = bundled("help_me_carry");
  std::vector<std::string> sent;
  std::vector<std::string> script{"skill-succeeded", "skill-succeeded", "skill-failed", "skill-failed", "said"};
  std::size_t i = 0;
  auto end = hfsm::run(
      m, [&]() -> std::optional<std::string> { return i < script.size() ? std::optional(script[i++]) : std::nullopt; },
      [&](const std::string& c) { sent.push_back(c); });
  EXPECT_EQ(end, "failed");
  EXPECT_EQ(sent.back(), "say:I could not carry the bag");

  hfsm::RunOptions opts;
  opts.max_steps = 50;
  EXPECT_THROW(hfsm::run(m, [] { return std::optional<std::string>("said"); }, [](const std::string&) {}, opts),
               StepLimitExceeded);
}

// Random event traces: the configuration always names existing states and
// every step is deterministic.
TEST(HfsmProperty, RandomTracesStayWellFormed) {
  for (const auto& name : kMachines) {
    auto m = bundled(name);
    auto events = std::vector<std::string>(m.events.begin(), m.events.end());
    events.push_back("error");
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::mt19937_64 rng(seed);
      std::vector<std::string> cmds;
      auto c = hfsm::initial_configuration(m, cmds);
      for (int i = 0; i < 60 && !hfsm::is_terminal(c.front()); ++i) {
        const auto& e = events[rng() % events.size()];
        auto a = hfsm::step(m, c, e), b = hfsm::step(m, c, e);
        ASSERT_EQ(a.config, b.config);
        ASSERT_EQ(a.commands, b.commands);
        const auto* level = &m;
        for (std::size_t k = 0; k < a.config.size(); ++k) {
          if (hfsm::is_terminal(a.config[k])) {
            ASSERT_EQ(k, 0u) << "terminal below the root";
            break;
          }
          ASSERT_TRUE(level->states.count(a.config[k])) << name << " " << hfsm::to_string(a.config);
          const auto& def = level->states.at(a.config[k]);
          ASSERT_EQ(def.composite(), k + 1 < a.config.size());
          if (def.composite()) level = def.child.get();
        }
        c = a.config;
      }
    }
  }
}
