#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/kb/knowledge_base.hpp"
#include "robostack/prism/homography.hpp"
#include "robostack/prism/rectify.hpp"

namespace robostack::prism {

// Map frame: right-handed, z up. Camera frame: pinhole, x right, y down,
// z along the optical axis. A camera at heading 0 and pitch 0 looks along +x;
// positive pitch tilts the optical axis upward.

/// Camera pose in the map at capture time.
struct CameraPose {
  double x = 0, y = 0, theta = 0;
  double height = 0;
  double pitch = 0;

  /// Rotation taking camera-frame vectors to map-frame vectors.
  Mat3 rotation() const {
    Mat3 r0;
    r0.col(0) = Vec3(0, -1, 0);
    r0.col(1) = Vec3(0, 0, -1);
    r0.col(2) = Vec3(1, 0, 0);
    return (Eigen::AngleAxisd(theta, Vec3::UnitZ()) * Eigen::AngleAxisd(-pitch, Vec3::UnitY())).toRotationMatrix() *
           r0;
  }
  Vec3 position() const { return {x, y, height}; }
};

/// Planar landmark pose in the map: model origin position plus the heading
/// its front face looks toward.
struct MapPose {
  double x = 0, y = 0, theta = 0;
  double height = 0;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

inline double angle_diff(double a, double b) { return std::abs(wrap_angle(a - b)); }

/// Composes the camera-frame plane pose with the camera-in-map pose.
inline MapPose to_map(const PlanePose& plane, const CameraPose& cam) {
  const Mat3 rmc = cam.rotation();
  const Vec3 origin = cam.position() + rmc * plane.translation;
  const Vec3 facing = rmc * (-plane.rotation.col(2));
  return {origin.x(), origin.y(), std::atan2(facing.y(), facing.x()), origin.z()};
}

/// Inverse of `to_map` for a landmark mounted vertically: the plane pose a
/// camera at `cam` observes. Model x runs along the face (to the left when
/// looking at it), model y points down.
inline PlanePose from_map(const MapPose& p, const CameraPose& cam) {
  const Vec3 normal(-std::cos(p.theta), -std::sin(p.theta), 0);  // away from the viewer
  const Vec3 down(0, 0, -1);
  const Vec3 along = down.cross(normal);
  Mat3 r_map;
  r_map.col(0) = along;
  r_map.col(1) = down;
  r_map.col(2) = normal;
  const Mat3 rcm = cam.rotation().transpose();
  return {rcm * r_map, rcm * (Vec3(p.x, p.y, p.height) - cam.position())};
}

struct PlanarDetection {
  std::string id;
  std::string cls;
  std::vector<Correspondence> correspondences;
  CameraPose camera;
  CameraIntrinsics intrinsics;
  Payload payload;
};

struct MapAnnotation {
  std::string id;
  std::string cls;
  MapPose pose;
  std::string label;
  double confidence = 0;
  std::vector<std::string> sources;
  double weight = 0;  // accumulated confidence used for merge averaging

  nlohmann::json to_json() const {
    return {{"id", id},         {"x", pose.x},         {"y", pose.y},
            {"theta", pose.theta}, {"height", pose.height}, {"label", label},
            {"confidence", confidence}};
  }
};

struct MergePolicy {
  double distance = 0.25;                           // meters
  double angle = 15.0 * std::numbers::pi / 180.0;   // radians
};

/// Annotation set written into the navigation map. Registration merges
/// repeated sightings of one landmark and mirrors every change into the KB.
class AnnotationMap {
 public:
  explicit AnnotationMap(MergePolicy policy = {}) : policy_(policy) {}

  const std::vector<MapAnnotation>& annotations() const { return annotations_; }

  /// Adds an annotation, merging it into an existing one of the same class and
  /// label within the policy thresholds. Returns the id it ended up under.
  std::string add(MapAnnotation a, kb::KnowledgeBase* base = nullptr) {
    if (!std::isfinite(a.pose.x) || !std::isfinite(a.pose.y) || !std::isfinite(a.pose.theta) ||
        !std::isfinite(a.pose.height))
      throw DegenerateConfiguration("annotation pose is not finite");
    if (trim(a.label).empty()) throw EmptyLabel("annotation label is empty");
    if (a.weight <= 0) a.weight = std::max(a.confidence, 1e-12);

    MapAnnotation* target = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (auto& m : annotations_) {
      if (m.cls != a.cls || m.label != a.label) continue;
      const double d = std::hypot(m.pose.x - a.pose.x, m.pose.y - a.pose.y);
      if (d <= policy_.distance && angle_diff(m.pose.theta, a.pose.theta) <= policy_.angle && d < best) {
        best = d;
        target = &m;
      }
    }
    if (target) {
      merge_into(*target, a);
    } else {
      if (a.id.empty()) a.id = a.cls + "-" + std::to_string(++counters_[a.cls]);
      annotations_.push_back(std::move(a));
      target = &annotations_.back();
    }
    if (base) write_facts(*target, *base);
    return target->id;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : annotations_) j.push_back(a.to_json());
    return j;
  }

  /// Loads a previously exported annotation file. Classes are recovered from
  /// the `<class>-<n>` id convention.
  static AnnotationMap from_json(const nlohmann::json& j, MergePolicy policy = {}) {
    AnnotationMap m(policy);
    for (const auto& e : j) {
      MapAnnotation a;
      a.id = e.at("id").get<std::string>();
      a.cls = e.value("class", a.id.substr(0, a.id.rfind('-')));
      a.pose = {e.at("x").get<double>(), e.at("y").get<double>(), e.at("theta").get<double>(),
                e.value("height", 0.0)};
      a.label = e.at("label").get<std::string>();
      a.confidence = e.value("confidence", 1.0);
      const auto dash = a.id.rfind('-');
      if (dash != std::string::npos) {
        try {
          auto& n = m.counters_[a.cls];
          n = std::max(n, std::stoi(a.id.substr(dash + 1)));
        } catch (const std::exception&) {
        }
      }
      m.annotations_.push_back(std::move(a));
    }
    return m;
  }

 private:
  static void merge_into(MapAnnotation& m, const MapAnnotation& a) {
    const double w = m.weight + a.weight;
    const double s = m.weight * std::sin(m.pose.theta) + a.weight * std::sin(a.pose.theta);
    const double c = m.weight * std::cos(m.pose.theta) + a.weight * std::cos(a.pose.theta);
    m.pose.x = (m.weight * m.pose.x + a.weight * a.pose.x) / w;
    m.pose.y = (m.weight * m.pose.y + a.weight * a.pose.y) / w;
    m.pose.height = (m.weight * m.pose.height + a.weight * a.pose.height) / w;
    m.pose.theta = std::atan2(s, c);
    m.weight = w;
    m.confidence = std::max(m.confidence, a.confidence);
    m.sources.insert(m.sources.end(), a.sources.begin(), a.sources.end());
  }

  static void write_facts(const MapAnnotation& a, kb::KnowledgeBase& base) {
    if (!base.has_entity(a.id)) base.add_entity(a.id, a.cls, kb::Origin::Observed);
    std::ostringstream pose;
    pose.precision(6);
    pose << std::fixed << a.pose.x << ' ' << a.pose.y << ' ' << a.pose.theta;
    base.assert_fact({a.id, "is-a", a.cls});
    base.assert_fact({a.id, "at-pose", pose.str()});
    for (const auto& old : base.objects({a.id, "labeled", std::nullopt}))
      if (old != a.label) base.retract_fact({a.id, "labeled", old});
    base.assert_fact({a.id, "labeled", a.label});
  }

  MergePolicy policy_;
  std::vector<MapAnnotation> annotations_;
  std::map<std::string, int> counters_;
};

struct RegisteredDetection {
  std::string annotation_id;
  PlanePose plane;
  MapPose pose;
  Label label;
  double residual = 0;
};

/// Full pipeline for one detection: homography, pose, rectification, label
/// extraction, map-frame composition, registration.
inline RegisteredDetection register_detection(const PlanarDetection& d, AnnotationMap& map, kb::KnowledgeBase* base,
                                              const LabelExtractor& extractor = PassThroughExtractor{},
                                              const RectifyOptions& ropts = {}) {
  const auto fit = estimate_homography(d.correspondences);
  RegisteredDetection r;
  r.residual = fit.residual;
  r.plane = decompose_to_pose(fit.h, d.intrinsics);
  r.label = extractor.extract(rectify(fit.h, d.payload, ropts));
  r.pose = to_map(r.plane, d.camera);
  MapAnnotation a;
  a.cls = d.cls;
  a.pose = r.pose;
  a.label = r.label.text;
  a.confidence = r.label.confidence;
  if (!d.id.empty()) a.sources.push_back(d.id);
  r.annotation_id = map.add(std::move(a), base);
  return r;
}

inline std::vector<PlanarDetection> parse_detections(const nlohmann::json& j) {
  if (!j.is_array()) throw DegenerateConfiguration("detections file must hold a JSON array");
  std::vector<PlanarDetection> out;
  std::size_t n = 0;
  for (const auto& e : j) {
    ++n;
    try {
      PlanarDetection d;
      d.id = e.value("id", "det-" + std::to_string(n));
      d.cls = e.at("class").get<std::string>();
      const auto& ip = e.at("image_points");
      const auto& mp = e.at("model_points");
      if (ip.size() != mp.size()) throw DegenerateConfiguration(d.id + ": image/model point counts differ");
      for (std::size_t i = 0; i < ip.size(); ++i)
        d.correspondences.push_back({Vec2(mp[i][0].get<double>(), mp[i][1].get<double>()),
                                     Vec2(ip[i][0].get<double>(), ip[i][1].get<double>())});
      const auto& cp = e.at("camera_pose");
      d.camera = {cp.value("x", 0.0), cp.value("y", 0.0), cp.value("theta", 0.0), cp.value("height", 0.0),
                  cp.value("pitch", 0.0)};
      const auto& k = e.at("intrinsics");
      d.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.value("cx", 0.0), k.value("cy", 0.0)};
      d.payload = Payload::from_json(e.value("payload", nlohmann::json::object()));
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& ex) {
      throw DegenerateConfiguration("detection " + std::to_string(n) + " is malformed: " + ex.what());
    }
  }
  return out;
}

inline std::vector<PlanarDetection> load_detections(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DegenerateConfiguration("cannot open detections file " + file.string());
  return parse_detections(nlohmann::json::parse(in));
}

}  // namespace robostack::prism
