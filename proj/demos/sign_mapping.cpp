// Registers the bundled sign detections into an annotation map and a KB,
// then prints what the KB learned.

#include <cstdio>

#include "robostack/app/scenario.hpp"
#include "robostack/prism/annotation.hpp"

using namespace robostack;

int main(int argc, char** argv) {
  const auto file = argc > 1 ? std::filesystem::path(argv[1]) : app::fixtures_dir() / "detections" / "demo_signs.json";
  kb::KnowledgeBase base;
  prism::AnnotationMap map;
  for (const auto& d : prism::load_detections(file)) {
    try {
      auto r = prism::register_detection(d, map, &base);
      std::printf("%-8s -> %-7s plane t=(%.3f %.3f %.3f)  map (%.3f, %.3f) heading %.3f  residual %.1e\n", d.id.c_str(),
                  r.annotation_id.c_str(), r.plane.translation.x(), r.plane.translation.y(), r.plane.translation.z(),
                  r.pose.x, r.pose.y, r.pose.theta, r.residual);
    } catch (const Error& e) {
      std::printf("%-8s rejected: %s\n", d.id.c_str(), e.what());
    }
  }
  std::printf("\nKB:\n");
  for (const auto& a : map.annotations())
    for (const char* rel : {"is-a", "at-pose", "labeled"})
      for (const auto& o : base.objects({a.id, rel, std::nullopt})) std::printf("  (%s, %s, %s)\n", a.id.c_str(), rel, o.c_str());
}
