#pragma once

#include <vector>

#include "mcvo/backend/state.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"

namespace mcvo {

struct LandmarkInitOptions {
  /// Widest pairwise ray angle required to triangulate (radians).
  double min_ray_angle = 0.01;
  /// Reprojection gate in pixel standard deviations.
  double max_error_sigmas = 3.0;
  double min_depth = 0.1;
  double max_depth = 500.0;
  int min_observations = 2;
  /// Optional per-camera factor applied to newly triangulated depths.
  std::vector<double> depth_bias;
};

/// Appends observations made at `frame` of landmarks already in the state.
/// Returns the number added.
int add_frame_observations(SlidingWindowState& state, const RigConfig& rig,
                           const FeatureTrackTable& tracks, int frame);

/// Triangulates every track that is observed in the window but not yet a
/// landmark, from the current window poses, anchors it at its first usable
/// in-window observation and adds all its in-window observations. Returns the
/// number of landmarks created.
int triangulate_new_landmarks(SlidingWindowState& state, const RigConfig& rig,
                              const FeatureTrackTable& tracks,
                              const LandmarkInitOptions& options = {});

}  // namespace mcvo
