#pragma once

#include <map>
#include <string>

#include <Eigen/Core>

#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/init/two_view.hpp"
#include "mcvo/init/types.hpp"

namespace mcvo {

struct SfmOptions {
  RelativePoseOptions relative;
  int min_shared_tracks = 8;
  int min_pnp_correspondences = 6;
  int refinement_rounds = 3;
  /// Levenberg-Marquardt iterations of the final bundle adjustment.
  int bundle_iterations = 30;
  /// Widest-ray angle required before a track is triangulated (radians).
  double min_triangulation_angle = 2e-3;
};

struct SfmResult {
  bool ok = false;
  std::string failure;
  CameraSfmTrajectory trajectory;
  /// Track id -> point in the camera frame of the window's first frame, in
  /// the same (unit-baseline) scale as the trajectory.
  std::map<int, Eigen::Vector3d> points;
  int pair_first = -1;
  int pair_second = -1;
};

/// Scale-ambiguous reconstruction of one camera over [first_frame,
/// last_frame]: relative pose of the widest-parallax frame pair, two-view
/// triangulation, PnP for the remaining frames, a few rounds of alternating
/// re-triangulation and PnP, a bundle adjustment, then re-anchoring at first_frame with the chosen
/// pair's baseline set to one.
SfmResult monocular_sfm_window(const FeatureTrackTable& tracks, int camera, int first_frame,
                               int last_frame, const CameraIntrinsic& intrinsic,
                               const SfmOptions& options = {});

}  // namespace mcvo
