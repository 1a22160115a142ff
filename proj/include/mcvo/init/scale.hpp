#pragma once

#include <span>
#include <vector>

#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/init/types.hpp"

namespace mcvo {

struct InitReadiness {
  bool ready = false;
  int principal_camera = -1;
  std::vector<double> parallax;
  std::vector<double> stability;
};

/// Ready iff every camera's window parallax exceeds the threshold; the
/// principal camera maximizes track stability (ties: lowest index).
InitReadiness check_initialization_ready(const FeatureTrackTable& tracks, int first_frame,
                                         int last_frame, double parallax_threshold = 30.0);

/// body_pose_from_camera applied per frame, then left-composed with the inverse of the
/// first body pose so the hypothesis starts at identity.
BodyTrajectoryHypothesis body_hypothesis(const CameraSfmTrajectory& sfm,
                                         const CameraExtrinsic& ext, double s);

/// Stacks, for every frame t >= 1 and camera pair i < j, the block row
/// [0 .. r_i T^i_t .. -r_j T^j_t .. 0] and the offset
/// theta = (t^i - r_i R^i_t r_i^T t^i) - (t^j - r_j R^j_t r_j^T t^j),
/// i.e. the difference of re-anchored body translations split into a part
/// linear in the scales and a part that depends only on rotations and
/// extrinsics. All trajectories must cover the same frames.
ScaleSystem build_scale_system(std::span<const CameraSfmTrajectory> trajectories,
                               std::span<const CameraExtrinsic> extrinsics);

enum class ScaleSolveMode { kNormalEquations, kLevenbergMarquardt };

struct ScaleSolveOptions {
  ScaleSolveMode mode = ScaleSolveMode::kNormalEquations;
  double max_condition = 1e8;
  double min_scale = 1e-3;
  /// Relative singular-value floor below which the system counts as rank
  /// deficient.
  double rank_tolerance = 1e-12;
};

/// Least-squares scales minimizing sum ||F s + theta||^2. Throws
/// std::invalid_argument when there are fewer rows than cameras.
ScaleEstimate solve_scales(const ScaleSystem& system, const ScaleSolveOptions& options = {});

}  // namespace mcvo
