#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/backend/state.hpp"
#include "mcvo/init/scale.hpp"
#include "mcvo/init/types.hpp"

namespace mcvo {

struct ScaleCorrectionOptions {
  int min_correspondences = 8;
  /// Corrections with |s - 1| at or below this are not applied.
  double deadband = 0.0;
  ScaleSolveOptions solve;
};

struct ScaleCorrectionReport {
  bool applied = false;
  bool observable = false;
  /// Cameras that took part, in column order.
  std::vector<int> cameras;
  /// Per participating camera: factor mapping its trajectory onto the fused
  /// body trajectory (depths are multiplied by it).
  std::vector<double> s;
  /// Per participating camera: estimated depth inflation, 1 / s.
  std::vector<double> inflation;
  ScaleEstimate estimate;
  std::string diagnostic;
};

/// Per camera, re-estimates camera-only body poses over the window by
/// pose-only refinement against that camera's landmarks (depths held), stacks
/// the scale-consistency system of those trajectories against the fused body
/// trajectory (body scale fixed to one) and rescales each camera's landmark
/// depths by its solved factor. Body poses are not modified. No-op when the
/// system is unobservable.
ScaleCorrectionReport correct_scale(SlidingWindowState& state,
                                    const ScaleCorrectionOptions& options = {});

/// The per-camera trajectories used by correct_scale, re-anchored at the
/// window's first frame (which keeps its fused pose). Observations made from
/// a landmark's anchor frame are not used. Cameras whose refinement fails at
/// any frame are omitted.
std::vector<CameraSfmTrajectory> camera_window_trajectories(const SlidingWindowState& state,
                                                            int min_correspondences = 8);

}  // namespace mcvo
