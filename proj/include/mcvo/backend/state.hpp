#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/geometry/camera.hpp"
#include "mcvo/geometry/pose.hpp"

namespace mcvo {

/// Landmarks are per camera; the id packs (camera, track id).
using LandmarkId = std::int64_t;

inline LandmarkId make_landmark_id(int camera, int track) {
  return (static_cast<std::int64_t>(camera) << 32) | static_cast<std::uint32_t>(track);
}
inline int landmark_camera(LandmarkId id) { return static_cast<int>(id >> 32); }
inline int landmark_track(LandmarkId id) {
  return static_cast<int>(static_cast<std::uint32_t>(id & 0xffffffffu));
}

struct FrameState {
  int frame = 0;
  double timestamp = 0.0;
  /// world_T_body
  Pose pose;
};

/// Inverse depth along the anchor camera's normalized ray (x, y, 1): the
/// anchor-camera point is anchor_ray / inverse_depth.
struct LandmarkState {
  LandmarkId id = 0;
  int camera = 0;
  int anchor_frame = 0;
  Eigen::Vector3d anchor_ray = Eigen::Vector3d::UnitZ();
  double inverse_depth = 1.0;
};

struct ReprojObservation {
  int camera = 0;
  LandmarkId landmark = 0;
  int frame = 0;
  /// Normalized image coordinates (x/z, y/z).
  Eigen::Vector2d normalized = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

/// Gaussian prior on the retained poses left behind by marginalization:
/// cost 0.5 * || r0 + J dx ||^2, with dx per pose = (Log(R_lin^T R), t - t_lin).
struct MarginalizationPrior {
  std::vector<int> frames;
  std::vector<Pose> linearization;
  Eigen::MatrixXd information;
  Eigen::VectorXd information_vector;
  Eigen::MatrixXd J;
  Eigen::VectorXd r0;

  int dimension() const { return 6 * static_cast<int>(frames.size()); }
  bool empty() const { return frames.empty(); }
};

struct SlidingWindowState {
  std::vector<CameraExtrinsic> extrinsics;
  /// Oldest first.
  std::vector<FrameState> frames;
  std::map<LandmarkId, LandmarkState> landmarks;
  std::vector<ReprojObservation> observations;
  MarginalizationPrior prior;
  /// Accumulated per-camera depth correction factors.
  std::vector<double> scales;
  std::vector<std::string> diagnostics;

  int capacity = 11;

  int num_cameras() const { return static_cast<int>(extrinsics.size()); }
  /// Position of a frame in `frames`, or -1.
  int frame_slot(int frame) const;
  const FrameState* find_frame(int frame) const;
};

/// Pixel standard deviation assumed for every observation.
inline constexpr double kObservationSigmaPx = 1.5;
/// Observations further than this from the optical axis are not used.
inline constexpr double kMaxObservationAngle = 80.0 * 3.14159265358979323846 / 180.0;

/// Normalized-plane observation with covariance propagated from an isotropic
/// pixel standard deviation; nullopt outside the model or beyond
/// kMaxObservationAngle.
std::optional<ReprojObservation> make_observation(const CameraIntrinsic& intrinsic, int camera,
                                                  LandmarkId landmark, int frame,
                                                  const Eigen::Vector2d& pixel,
                                                  double sigma_px = kObservationSigmaPx);

/// Landmark point in world coordinates.
Eigen::Vector3d landmark_world_point(const SlidingWindowState& state, const LandmarkState& lm);

/// Landmark anchored at `anchor_frame` that reproduces a world point; nullopt
/// when the anchor frame is not in the window or the point is not in front of
/// the anchor camera.
std::optional<LandmarkState> anchor_landmark(const SlidingWindowState& state, LandmarkId id,
                                             int anchor_frame, const Eigen::Vector3d& world_point);

}  // namespace mcvo
