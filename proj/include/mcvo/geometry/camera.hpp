#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/geometry/pose.hpp"

namespace mcvo {

enum class CameraModel { kPinhole, kEquidistant };

std::string to_string(CameraModel model);
std::optional<CameraModel> camera_model_from_string(const std::string& name);

struct CameraIntrinsic {
  CameraModel model = CameraModel::kPinhole;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  /// Maximum angle from the optical axis that the model accepts (radians).
  double fov_limit = 1.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument when focal lengths or the FoV limit are
  /// outside the range the model supports.
  void validate() const;
  bool in_image(const Eigen::Vector2d& px) const;
};

/// Camera pose expressed in the body frame (body_T_cam).
struct CameraExtrinsic {
  Pose cam_in_body;
};

struct Camera {
  CameraIntrinsic intrinsic;
  CameraExtrinsic extrinsic;
};

/// Static rig geometry; camera indices are stable for the lifetime of a run.
struct RigConfig {
  std::vector<Camera> cameras;

  int size() const { return static_cast<int>(cameras.size()); }
  void validate() const;
  /// New rig with only the listed cameras, in the given order.
  RigConfig subset(const std::vector<int>& indices) const;
};

/// Pixel of a camera-frame point, or nullopt when the point is behind the
/// camera or outside the model's field of view.
std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& point,
                                       const CameraIntrinsic& intr);

/// Unit ray through a pixel, or nullopt when the pixel maps outside the
/// model's field of view.
std::optional<Eigen::Vector3d> unproject(const Eigen::Vector2d& pixel,
                                         const CameraIntrinsic& intr);

/// Body pose from a camera pose: (R, s*T) composed with the inverse extrinsic.
/// Throws std::domain_error when s <= 0.
Pose body_pose_from_camera(const Pose& cam_pose, const CameraExtrinsic& ext,
                           double s);

}  // namespace mcvo
