#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mcvo {

/// Rigid transform mapping points from a child frame into a parent frame:
/// p_parent = rotation * p_child + translation.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);
  Pose(const Eigen::Matrix3d& R, const Eigen::Vector3d& t);

  static Pose Identity() { return Pose(); }

  Eigen::Matrix3d R() const { return rotation.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
};

/// Block 4x4 product a * b, renormalizing the quaternion.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// SO(3) exponential of an axis-angle vector.
Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega);

/// SO(3) logarithm, angle in [0, pi]. At exactly pi the axis is signed so
/// that its largest-magnitude component is positive (first index on ties).
Eigen::Vector3d so3_log(const Eigen::Quaterniond& q);
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

/// Inverse of the SO(3) right Jacobian: d Log(R Exp(d)) / d d at d = 0,
/// evaluated at phi = Log(R).
Eigen::Matrix3d so3_right_jacobian_inverse(const Eigen::Vector3d& phi);

/// Rotation angle of q in radians, in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);

/// Six-vector (axis-angle, translation) difference used by pose-graph edges.
Eigen::Matrix<double, 6, 1> pose_log(const Pose& p);

/// Right perturbation used by the optimizers: R <- R Exp(w), t <- t + R v.
Pose box_plus(const Pose& p, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace mcvo
