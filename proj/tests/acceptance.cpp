// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "robostack/app/scenario.hpp"
#include "robostack/executor/executor.hpp"
#include "robostack/grammar/grammar.hpp"
#include "robostack/hallway/hallway.hpp"
#include "robostack/hfsm/hfsm.hpp"
#include "robostack/planner/planner.hpp"
#include "robostack/sim/sim_world.hpp"
#include "support/planner_oracle.hpp"
#include "support/random_world.hpp"
#include "support/synthetic_views.hpp"

using namespace robostack;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

// 1. generate/parse round trip
Verdict grammar_round_trip() {
  const auto g = grammar::Grammar::load(app::default_grammar());
  std::size_t ok = 0;
  Verdict v;
  for (std::uint64_t seed = 0; seed < 10'000; ++seed) {
    auto d = g.generate(seed);
    try {
      if (g.parse(d.utterance) == d.frame) {
        ++ok;
        continue;
      }
      v.fail("seed " + std::to_string(seed) + ": frame differs for '" + d.utterance + "'");
    } catch (const Error& e) {
      v.fail("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  if (v.pass) v.detail = std::to_string(ok) + "/10000 frames equal";
  return v;
}

// 2. planner cost vs. brute-force Dijkstra
Verdict planner_oracle() {
  Verdict v;
  int unreachable = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto c = testsupport::random_case(seed);
    const double expected = testsupport::DijkstraOracle(c.spec, c.kb).cost(c.goal, c.kb);
    const auto s0 = planner::initial_state(c.kb);
    try {
      const double got = planner::plan(s0, c.goal, c.kb, {200'000}).cost;
      if (!std::isfinite(expected) || std::abs(got - expected) > 1e-9)
        v.fail("seed " + std::to_string(seed) + ": planner " + std::to_string(got) + " vs oracle " +
               std::to_string(expected));
    } catch (const NoPlan&) {
      ++unreachable;
      if (std::isfinite(expected)) v.fail("seed " + std::to_string(seed) + ": planner found no plan");
    }
  }
  if (v.pass) v.detail = "200 worlds agree (" + std::to_string(unreachable) + " unreachable on both sides)";
  return v;
}

// 3. open-world loop on the demo world
Verdict open_world_loop() {
  Verdict v;
  auto run = [](std::optional<std::string> apple_at, const char* world) {
    auto w = sim::load_world(app::fixtures_dir() / "worlds" / world);
    for (auto& o : w.spec.objects)
      if (o.id == "apple-1" && apple_at) o.true_location = *apple_at;
    sim::SimWorld sim(w.spec, w.kb);
    executor::Executor ex(w.kb, sim);
    auto hyps = w.kb.inject_hypotheses({"apple", kb::Determiner::Indefinite, std::nullopt}, "kitchen");
    planner::Goal goal{{{planner::kObjectVar, "delivered-to", "operator"}}, hyps.front().assumption};
    return ex.execute(goal, planner::initial_state(w.kb));
  };
  const std::vector<std::string> order{"counter", "kitchen-table", "cupboard"};
  for (std::size_t k = 1; k <= 3; ++k) {
    auto r = run(order[k - 1], "demo_apartment.json");
    if (r.status != executor::ExecutionStatusCode::Succeeded || r.plans != k || r.refutations != k - 1)
      v.fail("k=" + std::to_string(k) + ": " + to_string(r.status) + " with " + std::to_string(r.plans) + " plans, " +
             std::to_string(r.refutations) + " refutations");
    if (executor::to_json_lines(r.log) != executor::to_json_lines(run(order[k - 1], "demo_apartment.json").log))
      v.fail("k=" + std::to_string(k) + ": log differs between runs");
  }
  auto none = run(std::nullopt, "demo_apartment_noapple.json");
  if (none.status != executor::ExecutionStatusCode::Failed || !none.diagnosis || !none.diagnosis->invalid)
    v.fail("no apple: expected a diagnosis of an invalid assumption");
  else if (executor::to_json_lines(none.log) !=
           executor::to_json_lines(run(std::nullopt, "demo_apartment_noapple.json").log))
    v.fail("no apple: log differs between runs");
  if (v.pass) v.detail = "k=1..3 succeed with k plans; no apple: '" + none.diagnosis->assumption + "' " + none.diagnosis->conclusion;
  return v;
}

// 4. homography and pose recovery
Verdict homography() {
  Verdict v;
  std::mt19937_64 rng(20240601);
  double worst_pose = 0, worst_rms = 0;
  for (int i = 0; i < 100; ++i) {
    auto view = testsupport::synthetic_view(rng, 4 + i % 5);
    auto fit = prism::estimate_homography(view.corr);
    worst_rms = std::max(worst_rms, prism::reprojection_rms(fit.h, view.corr));
    auto pose = prism::to_map(prism::decompose_to_pose(fit.h, view.intrinsics), view.camera);
    worst_pose = std::max(worst_pose, testsupport::pose_error(pose, view.truth));
  }
  if (!(worst_pose < 1e-6)) v.fail("pose error " + std::to_string(worst_pose));
  if (!(worst_rms < 1e-9)) v.fail("reprojection RMS " + std::to_string(worst_rms));

  const std::vector<std::vector<prism::Correspondence>> degenerate{
      {{{0, 0}, {0, 0}}, {{1, 0}, {10, 0}}, {{2, 0}, {20, 0}}, {{3, 0}, {30, 0}}},
      {{{0, 0}, {5, 5}}, {{1, 1}, {10, 10}}, {{2, 2}, {15, 15}}, {{0, 1}, {40, 3}}},
      {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {2, 0}}, {{0, 1}, {3, 0}}}};
  int rejected = 0;
  for (const auto& d : degenerate) {
    try {
      prism::estimate_homography(d);
    } catch (const DegenerateConfiguration&) {
      ++rejected;
    }
  }
  if (rejected != static_cast<int>(degenerate.size())) v.fail("a collinear configuration was accepted");
  char buf[160];
  std::snprintf(buf, sizeof buf, "max pose error %.2e, max RMS %.2e px, %d/%zu degenerate rejected", worst_pose,
                worst_rms, rejected, degenerate.size());
  if (v.pass) v.detail = buf;
  return v;
}

// 5. hallway calibration, monotonicity, stop rule
Verdict hallway_sim() {
  Verdict v;
  hallway::CorridorSpec spec;
  auto human = [](double p) {
    hallway::HumanModel h;
    h.p_comply = p;
    return h;
  };
  const auto policy = hallway::SignalPolicy::TurnSignal;
  // signal alone vs. signal with the passive demonstration
  auto lo = hallway::run_batch(spec, policy, human(0.10), 10'000, 1);
  auto hi = hallway::run_batch(spec, hallway::SignalPolicy::TurnSignalWithDemo, human(0.80), 10'000, 1);
  if (std::abs(lo.rate - 0.90) > 0.01) v.fail("p=0.10 rate " + std::to_string(lo.rate));
  if (std::abs(hi.rate - 0.20) > 0.01) v.fail("p=0.80 rate " + std::to_string(hi.rate));

  double prev = 2.0;
  std::string grid;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double r = hallway::run_batch(spec, policy, human(p), 5'000, 2).rate;
    if (r > prev) v.fail("rate rises at p=" + std::to_string(p));
    prev = r;
    char b[16];
    std::snprintf(b, sizeof b, "%s%.3f", grid.empty() ? "" : " ", r);
    grid += b;
  }

  std::size_t ticks = 0, stops = 0, moved = 0;
  hallway::TrialOptions opts;
  opts.record_trajectory = true;
  for (std::uint64_t i = 0; ticks < 50'000; ++i) {
    auto o = hallway::run_trial(spec, policy, human(0.5), 3, i, opts);
    std::optional<hallway::Sample> halt;
    for (const auto& s : o.trajectory) {
      if (++ticks > 50'000) break;
      if (halt && (s.robot_x != halt->robot_x || s.robot_y != halt->robot_y)) ++moved;
      if (s.stopped && !halt) {
        halt = s;
        ++stops;
      }
    }
  }
  if (moved) v.fail(std::to_string(moved) + " ticks of motion after a stop");
  if (!stops) v.fail("no stops occurred in the logged ticks");
  char buf[200];
  std::snprintf(buf, sizeof buf, "rates %.4f / %.4f; grid %s; %zu stops, 0 moves in 50000 ticks", lo.rate, hi.rate,
                grid.c_str(), stops);
  if (v.pass) v.detail = buf;
  return v;
}

// 6. HFSM validation and one-step error recovery
Verdict hfsm_safety() {
  Verdict v;
  std::size_t configs = 0, machines = 0;
  for (const auto& e : fs::directory_iterator(app::fixtures_dir() / "machines")) {
    if (e.path().extension() != ".json") continue;
    ++machines;
    auto m = hfsm::MachineDefinition::load(e.path());
    if (!hfsm::validate(m).empty()) v.fail(m.name + ": " + hfsm::validate(m).front());
    configs += hfsm::reachable_configurations(m).size();
    if (auto bad = hfsm::recovery_violations(m); !bad.empty())
      v.fail(m.name + ": error from " + hfsm::to_string(bad.front()) + " misses recovery");
  }
  if (v.pass) v.detail = std::to_string(machines) + " machines, " + std::to_string(configs) + " configurations";
  return v;
}

// 7. byte-identical scenario logs
Verdict determinism() {
  Verdict v;
  std::size_t n = 0, lines = 0;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(app::fixtures_dir() / "scenarios"))
    if (e.path().extension() == ".scenario") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto sc = app::Scenario::load(f);
    auto a = app::run_scenario(sc), b = app::run_scenario(sc);
    ++n;
    lines += a.log.size();
    if (a.log != b.log) v.fail(f.filename().string() + " logs differ");
  }
  if (n == 0) v.fail("no scenarios found");
  if (v.pass) v.detail = std::to_string(n) + " scenarios, " + std::to_string(lines) + " log lines each run";
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> all{
      {1, "grammar round-trip", 10, grammar_round_trip}, {2, "planner oracle equivalence", 60, planner_oracle},
      {3, "open-world loop", 0, open_world_loop},         {4, "homography/pose", 5, homography},
      {5, "hallway calibration", 30, hallway_sim},       {6, "HFSM safety", 5, hfsm_safety},
      {7, "end-to-end determinism", 0, determinism}};
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) v.fail("took " + std::to_string(secs) + " s");
    failed += !v.pass;
    std::printf("%s %d %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
  }
  return failed ? 1 : 0;
}
