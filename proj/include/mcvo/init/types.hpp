#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/geometry/pose.hpp"

namespace mcvo {

/// Scale-ambiguous monocular trajectory of one camera over the
/// initialization window. poses[t] is the camera pose at window frame t
/// expressed in the camera frame of window frame 0, so poses[0] = identity.
struct CameraSfmTrajectory {
  int camera = 0;
  std::vector<int> frames;
  std::vector<Pose> poses;
  int inliers = 0;
};

/// Stacked scale-consistency system: one 3xN block row per (frame t >= 1, pair i<j).
struct ScaleSystem {
  int num_cameras = 0;
  Eigen::MatrixXd F;
  Eigen::VectorXd theta;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  int rows() const { return static_cast<int>(F.rows()); }
};

enum class ScaleStatus {
  kOk,
  kIllConditioned,
  kNonPositiveScale,
  kRankDeficient,
};

std::string to_string(ScaleStatus status);

struct ScaleEstimate {
  Eigen::VectorXd s;
  /// RMS of the per-(frame, pair) 3-vector residual norms (meters).
  double residual_rms = 0.0;
  double condition_number = 0.0;
  bool observable = false;
  ScaleStatus status = ScaleStatus::kRankDeficient;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

/// Body poses over the window implied by one camera at a given scale,
/// re-anchored so the window's first pose is identity.
struct BodyTrajectoryHypothesis {
  int camera = 0;
  std::vector<Pose> poses;
};

}  // namespace mcvo
