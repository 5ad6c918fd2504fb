#pragma once

// Rigid transforms in millimeters. A Pose maps points from its child frame
// into its parent frame: p_parent = rotation * p_child + translation.

#include <Eigen/Geometry>

#include <cmath>

namespace torqueflow {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& t, const Quat& q) : translation(t), rotation(q.normalized()) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {t, Quat::Identity()}; }
  static Pose from_axis_angle(const Vec3& axis, double radians, const Vec3& t = Vec3::Zero()) {
    return {t, Quat(Eigen::AngleAxisd(radians, axis.normalized()))};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }
};

inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate().normalized();
  out.translation = -(out.rotation * p.translation);
  return out;
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// Largest per-component difference, with q and -q treated as the same rotation.
inline double pose_distance(const Pose& a, const Pose& b) {
  const double dt = (a.translation - b.translation).cwiseAbs().maxCoeff();
  const auto& qa = a.rotation.coeffs();
  const auto& qb = b.rotation.coeffs();
  const double dq = std::min((qa - qb).cwiseAbs().maxCoeff(), (qa + qb).cwiseAbs().maxCoeff());
  return std::max(dt, dq);
}

inline bool is_unit(const Quat& q, double tol = 1e-9) { return std::abs(q.norm() - 1.0) <= tol; }

}  // namespace torqueflow
