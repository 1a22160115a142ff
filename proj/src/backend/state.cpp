#include "mcvo/backend/state.hpp"

#include <cmath>

namespace mcvo {

int SlidingWindowState::frame_slot(int frame) const {
  for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
    if (frames[i].frame == frame) return i;
  }
  return -1;
}

const FrameState* SlidingWindowState::find_frame(int frame) const {
  const int slot = frame_slot(frame);
  return slot < 0 ? nullptr : &frames[slot];
}

std::optional<ReprojObservation> make_observation(const CameraIntrinsic& intrinsic, int camera,
                                                  LandmarkId landmark, int frame,
                                                  const Eigen::Vector2d& pixel, double sigma_px) {
  const auto ray = unproject(pixel, intrinsic);
  if (!ray || std::acos(std::clamp(ray->z(), -1.0, 1.0)) > kMaxObservationAngle) {
    return std::nullopt;
  }
  ReprojObservation obs;
  obs.camera = camera;
  obs.landmark = landmark;
  obs.frame = frame;
  obs.normalized = ray->head<2>() / ray->z();

  const Eigen::Matrix2d K_inv = Eigen::Vector2d(1.0 / intrinsic.fx, 1.0 / intrinsic.fy).asDiagonal();
  Eigen::Matrix2d J = K_inv;
  if (intrinsic.model == CameraModel::kEquidistant) {
    const Eigen::Vector2d d((pixel.x() - intrinsic.cx) / intrinsic.fx,
                            (pixel.y() - intrinsic.cy) / intrinsic.fy);
    const double theta = d.norm();
    double g = 1.0, dg_over_theta = 2.0 / 3.0;
    if (theta > 1e-4) {
      const double t = std::tan(theta);
      g = t / theta;
      dg_over_theta = (theta * (1.0 + t * t) - t) / (theta * theta * theta);
    }
    J = (g * Eigen::Matrix2d::Identity() + dg_over_theta * d * d.transpose()) * K_inv;
  }
  obs.covariance = sigma_px * sigma_px * J * J.transpose();
  return obs;
}

Eigen::Vector3d landmark_world_point(const SlidingWindowState& state, const LandmarkState& lm) {
  const FrameState* anchor = state.find_frame(lm.anchor_frame);
  const Pose world_T_cam = anchor->pose * state.extrinsics[lm.camera].cam_in_body;
  return world_T_cam * (lm.anchor_ray / lm.inverse_depth);
}

std::optional<LandmarkState> anchor_landmark(const SlidingWindowState& state, LandmarkId id,
                                             int anchor_frame, const Eigen::Vector3d& world_point) {
  const FrameState* anchor = state.find_frame(anchor_frame);
  if (anchor == nullptr) return std::nullopt;
  const int camera = landmark_camera(id);
  const Eigen::Vector3d pc =
      inverse(anchor->pose * state.extrinsics[camera].cam_in_body) * world_point;
  if (!(pc.z() > 1e-6)) return std::nullopt;
  LandmarkState lm;
  lm.id = id;
  lm.camera = camera;
  lm.anchor_frame = anchor_frame;
  lm.anchor_ray = pc / pc.z();
  lm.inverse_depth = 1.0 / pc.z();
  return lm;
}

}  // namespace mcvo
