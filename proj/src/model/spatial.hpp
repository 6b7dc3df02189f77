#pragma once

// Internal 6D spatial algebra. Motion vectors are [angular; linear], force
// vectors [moment; force], all expressed in the frame named by the caller.

#include <Eigen/Dense>

namespace legsafe::model::spatial {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Motion transform from frame A to frame B, where E rotates A coordinates
/// into B coordinates and r is the origin of B expressed in A.
inline Mat6 motion_transform(const Eigen::Matrix3d& E, const Eigen::Vector3d& r) {
  Mat6 X = Mat6::Zero();
  X.topLeftCorner<3, 3>() = E;
  X.bottomRightCorner<3, 3>() = E;
  X.bottomLeftCorner<3, 3>() = -E * skew(r);
  return X;
}

/// v x m (motion cross product).
inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec6 out;
  const Eigen::Vector3d w = v.head<3>();
  const Eigen::Vector3d vl = v.tail<3>();
  out.head<3>() = w.cross(m.head<3>());
  out.tail<3>() = w.cross(m.tail<3>()) + vl.cross(m.head<3>());
  return out;
}

/// v x* f (force cross product).
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  const Eigen::Vector3d w = v.head<3>();
  const Eigen::Vector3d vl = v.tail<3>();
  out.head<3>() = w.cross(f.head<3>()) + vl.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

/// Rigid-body inertia about the frame origin.
inline Mat6 rigid_body_inertia(double mass, const Eigen::Vector3d& com,
                               const Eigen::Matrix3d& inertia_com) {
  const Eigen::Matrix3d C = skew(com);
  Mat6 I;
  I.topLeftCorner<3, 3>() = inertia_com + mass * C * C.transpose();
  I.topRightCorner<3, 3>() = mass * C;
  I.bottomLeftCorner<3, 3>() = mass * C.transpose();
  I.bottomRightCorner<3, 3>() = mass * Eigen::Matrix3d::Identity();
  return I;
}

}  // namespace legsafe::model::spatial
