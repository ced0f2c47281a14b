// Conflict rate against compliance for each signalling policy.

#include <cstdio>
#include <cstdlib>

#include "robostack/hallway/hallway.hpp"

using namespace robostack;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  hallway::CorridorSpec spec;
  std::printf("%-12s%22s%22s%22s\n", "p_comply", "none", "signal", "signal+demo");
  for (int i = 0; i <= 10; ++i) {
    hallway::HumanModel human;
    human.p_comply = i / 10.0;
    std::printf("%-12.1f", human.p_comply);
    for (auto p : {hallway::SignalPolicy::None, hallway::SignalPolicy::TurnSignal,
                   hallway::SignalPolicy::TurnSignalWithDemo}) {
      auto r = hallway::run_batch(spec, p, human, n, 1);
      std::printf("   %.3f [%.3f,%.3f]", r.rate, r.ci95.lo, r.ci95.hi);
    }
    std::printf("\n");
  }
}
