// Walks the apple command through the open-world loop: one run per kitchen
// placement the apple might really be on, plus the apartment without one.

#include <cstdio>
#include <optional>
#include <string>

#include "robostack/app/scenario.hpp"
#include "robostack/executor/executor.hpp"
#include "robostack/grammar/command_goal.hpp"
#include "robostack/sim/sim_world.hpp"

using namespace robostack;

static void run(const char* world_file, std::optional<std::string> apple_at) {
  auto w = sim::load_world(app::fixtures_dir() / "worlds" / world_file);
  for (auto& o : w.spec.objects)
    if (o.id == "apple-1" && apple_at) o.true_location = *apple_at;
  sim::SimWorld world(w.spec, w.kb);
  executor::Executor ex(w.kb, world);
  ex.set_listener([](const executor::Event& e) {
    std::printf("  %7.2fs %-11s %-32s %s\n", e.t, to_string(e.phase), e.action.c_str(), e.outcome.c_str());
  });

  const auto g = grammar::Grammar::load(app::default_grammar());
  auto goal = grammar::frame_to_goal(g.parse("bring me an apple from the kitchen"), w.kb);
  std::printf("apple at %s:\n", apple_at ? apple_at->c_str() : "nowhere");
  auto r = ex.execute(goal, planner::initial_state(w.kb));
  std::printf("  => %s after %zu plans, %zu refutations\n", to_string(r.status), r.plans, r.refutations);
  if (r.diagnosis) std::printf("%s\n", r.diagnosis->to_json().dump(2).c_str());
  std::printf("\n");
}

int main() {
  for (const char* loc : {"counter", "kitchen-table", "cupboard"}) run("demo_apartment.json", loc);
  run("demo_apartment_noapple.json", std::nullopt);
}
