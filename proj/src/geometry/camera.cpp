#include "mcvo/geometry/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace mcvo {

std::string to_string(CameraModel model) {
  switch (model) {
    case CameraModel::kPinhole:
      return "pinhole";
    case CameraModel::kEquidistant:
      return "equidistant";
  }
  return "unknown";
}

std::optional<CameraModel> camera_model_from_string(const std::string& name) {
  if (name == "pinhole") return CameraModel::kPinhole;
  if (name == "equidistant" || name == "fisheye") return CameraModel::kEquidistant;
  return std::nullopt;
}

void CameraIntrinsic::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  const double max_fov = model == CameraModel::kPinhole ? M_PI_2 : M_PI;
  const bool ok = model == CameraModel::kPinhole
                      ? (fov_limit > 0.0 && fov_limit < max_fov)
                      : (fov_limit > 0.0 && fov_limit <= max_fov);
  if (!ok) {
    throw std::invalid_argument("camera fov_limit outside the range of the " +
                                to_string(model) + " model");
  }
  if (width < 0 || height < 0) {
    throw std::invalid_argument("camera image size must be non-negative");
  }
}

bool CameraIntrinsic::in_image(const Eigen::Vector2d& px) const {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
}

void RigConfig::validate() const {
  if (cameras.size() < 2) {
    throw std::invalid_argument("a rig needs at least two cameras");
  }
  for (const auto& cam : cameras) {
    cam.intrinsic.validate();
  }
}

RigConfig RigConfig::subset(const std::vector<int>& indices) const {
  RigConfig out;
  for (int idx : indices) {
    if (idx < 0 || idx >= size()) {
      throw std::out_of_range("camera index " + std::to_string(idx) +
                              " not in rig");
    }
    out.cameras.push_back(cameras[idx]);
  }
  return out;
}

std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& p,
                                       const CameraIntrinsic& intr) {
  const double rxy = std::hypot(p.x(), p.y());
  const double theta = std::atan2(rxy, p.z());
  if (theta >= intr.fov_limit) return std::nullopt;

  if (intr.model == CameraModel::kPinhole) {
    if (p.z() <= 0.0) return std::nullopt;
    return Eigen::Vector2d(intr.fx * p.x() / p.z() + intr.cx,
                           intr.fy * p.y() / p.z() + intr.cy);
  }

  if (rxy == 0.0) {
    if (p.z() <= 0.0) return std::nullopt;
    return Eigen::Vector2d(intr.cx, intr.cy);
  }
  const double cos_phi = p.x() / rxy;
  const double sin_phi = p.y() / rxy;
  return Eigen::Vector2d(intr.fx * theta * cos_phi + intr.cx,
                         intr.fy * theta * sin_phi + intr.cy);
}

std::optional<Eigen::Vector3d> unproject(const Eigen::Vector2d& px,
                                         const CameraIntrinsic& intr) {
  const double mx = (px.x() - intr.cx) / intr.fx;
  const double my = (px.y() - intr.cy) / intr.fy;

  if (intr.model == CameraModel::kPinhole) {
    Eigen::Vector3d ray(mx, my, 1.0);
    if (std::atan(std::hypot(mx, my)) >= intr.fov_limit) return std::nullopt;
    return ray.normalized();
  }

  const double theta = std::hypot(mx, my);
  if (theta >= intr.fov_limit) return std::nullopt;
  if (theta == 0.0) return Eigen::Vector3d(0.0, 0.0, 1.0);
  const double s = std::sin(theta) / theta;
  return Eigen::Vector3d(s * mx, s * my, std::cos(theta));
}

Pose body_pose_from_camera(const Pose& cam_pose, const CameraExtrinsic& ext,
                           double s) {
  if (!(s > 0.0)) {
    throw std::domain_error("scale factor must be positive");
  }
  Pose scaled = cam_pose;
  scaled.translation = s * cam_pose.translation;
  return compose(scaled, inverse(ext.cam_in_body));
}

}  // namespace mcvo
