#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "robostack/core/error.hpp"

namespace robostack::prism {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Model-plane point (meters, Z = 0) and where it appears in the image (pixels).
struct Correspondence {
  Vec2 model;
  Vec2 image;
};

/// 3x3 projective map from the model plane to the image, scaled so the
/// bottom-right element is 1 whenever it is nonzero.
class Homography {
 public:
  Homography() : m_(Mat3::Identity()) {}
  explicit Homography(const Mat3& m) : m_(normalize(m)) {}

  const Mat3& matrix() const { return m_; }

  Vec2 apply(const Vec2& p) const { return (m_ * p.homogeneous()).hnormalized(); }

  Homography inverse() const {
    Eigen::FullPivLU<Mat3> lu(m_);
    if (!lu.isInvertible() || !std::isfinite(condition())) throw SingularHomography("homography is not invertible");
    return Homography(lu.inverse());
  }

  double condition() const {
    Eigen::JacobiSVD<Mat3> svd(m_);
    const auto& s = svd.singularValues();
    return s(2) > 0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
  }

 private:
  static Mat3 normalize(const Mat3& m) {
    constexpr double kEps = 1e-15;
    if (std::abs(m(2, 2)) > kEps * m.norm()) return m / m(2, 2);
    return m / m.norm();
  }

  Mat3 m_;
};

struct HomographyFit {
  Homography h;
  double residual = 0.0;  // RMS symmetric transfer error
};

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

  Mat3 matrix() const {
    if (!(fx > 0) || !(fy > 0)) throw DegenerateConfiguration("focal lengths must be positive");
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }
};

/// Pose of the model plane in the camera frame: X_cam = R [x y 0]^T + t.
struct PlanePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

namespace detail {

// Similarity taking `pts` to zero centroid and mean distance sqrt(2).
inline Mat3 hartley_transform(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0)) throw DegenerateConfiguration("all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

inline double cross(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a, v = c - a;
  return u.x() * v.y() - u.y() * v.x();
}

// Points are expected in Hartley-normalized coordinates (scale ~ 1).
inline void check_configuration(const std::vector<Vec2>& pts, const char* side) {
  constexpr double kTol = 1e-9;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((pts[i] - pts[j]).norm() < kTol)
        throw DegenerateConfiguration(std::string("coincident ") + side + " points");
  bool all_collinear = true;
  for (std::size_t k = 2; k < n && all_collinear; ++k)
    if (std::abs(cross(pts[0], pts[1], pts[k])) > kTol) all_collinear = false;
  if (all_collinear) throw DegenerateConfiguration(std::string("all ") + side + " points are collinear");
  if (n == 4) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k)
          if (std::abs(cross(pts[i], pts[j], pts[k])) < kTol)
            throw DegenerateConfiguration(std::string("three collinear ") + side + " points among four");
  }
}

inline Vec2 transform(const Mat3& t, const Vec2& p) { return (t * p.homogeneous()).hnormalized(); }

}  // namespace detail

inline double symmetric_transfer_rms(const Homography& h, std::span<const Correspondence> corr) {
  const Homography inv = h.inverse();
  double sum = 0;
  for (const auto& c : corr) {
    sum += (h.apply(c.model) - c.image).squaredNorm();
    sum += (inv.apply(c.image) - c.model).squaredNorm();
  }
  return std::sqrt(sum / (2.0 * static_cast<double>(corr.size())));
}

/// RMS distance in pixels between observed image points and projected model points.
inline double reprojection_rms(const Homography& h, std::span<const Correspondence> corr) {
  double sum = 0;
  for (const auto& c : corr) sum += (h.apply(c.model) - c.image).squaredNorm();
  return std::sqrt(sum / static_cast<double>(corr.size()));
}

/// Normalized direct linear transform: Hartley-normalize both point sets,
/// take the right singular vector of the smallest singular value, undo the
/// normalization.
inline HomographyFit estimate_homography(std::span<const Correspondence> corr) {
  if (corr.size() < 4) throw DegenerateConfiguration("need at least 4 correspondences");
  std::vector<Vec2> model, image;
  for (const auto& c : corr) {
    if (!c.model.allFinite() || !c.image.allFinite()) throw DegenerateConfiguration("non-finite point");
    model.push_back(c.model);
    image.push_back(c.image);
  }
  const Mat3 tm = detail::hartley_transform(model);
  const Mat3 ti = detail::hartley_transform(image);
  for (auto& p : model) p = detail::transform(tm, p);
  for (auto& p : image) p = detail::transform(ti, p);
  detail::check_configuration(model, "model");
  detail::check_configuration(image, "image");

  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = model[i].x(), y = model[i].y(), u = image[i].x(), v = image[i].y();
    a.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    a.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-10 * sv(0)) throw DegenerateConfiguration("correspondences do not determine a homography");
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  const Mat3 h = ti.inverse() * hn * tm;
  HomographyFit fit{Homography(h), 0.0};
  fit.residual = symmetric_transfer_rms(fit.h, corr);
  return fit;
}

/// Homography induced by a plane at `pose` seen through `k`: K [r1 r2 t].
inline Homography compose_homography(const CameraIntrinsics& k, const PlanePose& pose) {
  Mat3 b;
  b.col(0) = pose.rotation.col(0);
  b.col(1) = pose.rotation.col(1);
  b.col(2) = pose.translation;
  return Homography(k.matrix() * b);
}

/// Recovers the plane pose from a homography. The rotation is projected onto
/// SO(3); the sign is chosen so the plane is in front of the camera
/// (t_z > 0) and shows its front face (normal pointing away from the
/// camera, r3 . t > 0).
inline PlanePose decompose_to_pose(const Homography& h, const CameraIntrinsics& k) {
  h.inverse();  // throws when singular
  const Mat3 b = k.matrix().inverse() * h.matrix();
  const Vec3 b1 = b.col(0), b2 = b.col(1), b3 = b.col(2);
  const double n1 = b1.norm(), n2 = b2.norm();
  if (!(n1 > 0) || !(n2 > 0)) throw SingularHomography("degenerate homography columns");
  Vec3 r1 = b1 / n1, r2 = b2 / n2;
  Vec3 t = b3 / (0.5 * (n1 + n2));
  if (t.z() < 0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  if (!(t.z() > 0)) throw BehindCamera("plane passes through the camera center");
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1;
  PlanePose pose{u * v.transpose(), t};
  if (!(pose.rotation.col(2).dot(t) > 0))
    throw BehindCamera("only the back of the plane would be visible; the plane lies behind the camera");
  return pose;
}

/// Geodesic angle between two rotations, accurate near zero.
inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const double chord = (a - b).norm() / (2.0 * std::sqrt(2.0));
  return 2.0 * std::asin(std::min(1.0, chord));
}

}  // namespace robostack::prism
