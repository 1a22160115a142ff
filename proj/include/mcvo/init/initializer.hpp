#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcvo/backend/landmarks.hpp"
#include "mcvo/backend/state.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/init/scale.hpp"
#include "mcvo/init/sfm.hpp"
#include "mcvo/parallelism.hpp"

namespace mcvo {

struct InitOptions {
  int window_frames = 10;
  double parallax_threshold = 30.0;
  SfmOptions sfm;
  ScaleSolveOptions solve;
  LandmarkInitOptions landmarks;
  Parallelism parallelism = Parallelism::kOpenMP;
};

/// Builds the first sliding window: body poses from the principal camera's
/// hypothesis at its solved scale, re-anchored so the last window frame (the
/// one that triggered initialization) is the world origin, and landmarks
/// triangulated per camera from the resulting metric camera poses.
/// timestamps is indexed by frame. Throws std::invalid_argument when the
/// estimate is not observable.
SlidingWindowState initialize_state(const RigConfig& rig,
                                    std::span<const CameraSfmTrajectory> trajectories,
                                    const ScaleEstimate& scales, int principal_camera,
                                    const FeatureTrackTable& tracks,
                                    const std::vector<double>& timestamps,
                                    const LandmarkInitOptions& options = {});

struct InitResult {
  bool success = false;
  std::string failure;
  int first_frame = -1;
  int last_frame = -1;
  InitReadiness readiness;
  std::vector<SfmResult> sfm;
  ScaleEstimate scales;
  SlidingWindowState state;
};

/// Readiness check, per-camera SfM, scale solve and state assembly over
/// [last_frame - window_frames + 1, last_frame].
InitResult try_initialize(const RigConfig& rig, const FeatureTrackTable& tracks, int last_frame,
                          const std::vector<double>& timestamps,
                          const InitOptions& options = {});

/// Per-camera SfM inlier counts, solved scales, residual RMS and condition
/// number.
std::string format_init_report(const InitResult& result);

}  // namespace mcvo
