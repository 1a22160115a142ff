#include "mcvo/geometry/pose.hpp"

#include <cmath>

namespace mcvo {

Pose::Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
    : rotation(q.normalized()), translation(t) {}

Pose::Pose(const Eigen::Matrix3d& R, const Eigen::Vector3d& t)
    : rotation(Eigen::Quaterniond(R).normalized()), translation(t) {}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = R();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& a) {
  Pose out;
  out.rotation = a.rotation.conjugate();
  out.translation = -(out.rotation * a.translation);
  return out;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  Eigen::Quaterniond q;
  if (theta < 1e-8) {
    // second-order series keeps the result accurate near zero
    const double theta2 = theta * theta;
    q.w() = 1.0 - theta2 / 8.0;
    q.vec() = (0.5 - theta2 / 48.0) * omega;
  } else {
    const double half = 0.5 * theta;
    q.w() = std::cos(half);
    q.vec() = (std::sin(half) / theta) * omega;
  }
  return q.normalized();
}

Eigen::Vector3d so3_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double vnorm = q.vec().norm();
  if (vnorm < 1e-12) {
    // small angle: theta / sin(theta/2) -> 2 / w
    return (2.0 / q.w()) * q.vec();
  }
  Eigen::Vector3d axis = q.vec() / vnorm;
  if (std::abs(q.w()) < 1e-12) {
    // angle within 1e-12 of pi: q and -q are indistinguishable here
    Eigen::Index largest = 0;
    axis.cwiseAbs().maxCoeff(&largest);
    if (axis[largest] < 0.0) axis = -axis;
    return 2.0 * std::atan2(vnorm, std::abs(q.w())) * axis;
  }
  const double theta = 2.0 * std::atan2(vnorm, q.w());
  return theta * axis;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  return so3_log(Eigen::Quaterniond(R));
}

Eigen::Matrix3d so3_right_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d W = skew(phi);
  const double c = theta < 1e-6
                       ? 1.0 / 12.0
                       : 1.0 / (theta * theta) -
                             (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * W + c * W * W;
}

double rotation_angle(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond n = q.normalized();
  return 2.0 * std::atan2(n.vec().norm(), std::abs(n.w()));
}

Eigen::Matrix<double, 6, 1> pose_log(const Pose& p) {
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = so3_log(p.rotation);
  out.tail<3>() = p.translation;
  return out;
}

Pose box_plus(const Pose& p, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  out.rotation = (p.rotation * so3_exp(delta.head<3>())).normalized();
  out.translation = p.translation + p.rotation * delta.tail<3>();
  return out;
}

}  // namespace mcvo
