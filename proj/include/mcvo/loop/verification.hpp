#pragma once

#include <cstdint>
#include <vector>

#include "mcvo/geometry/camera.hpp"
#include "mcvo/loop/keyframe_database.hpp"

namespace mcvo {

struct LoopVerifyOptions {
  /// Best match must be closer than ratio times the second best.
  double ratio = 0.8;
  int max_hamming = 80;
  int min_inliers = 20;
  int ransac_iterations = 300;
  /// Angular inlier threshold between a query ray and a reprojected point.
  double inlier_angle = 0.01;
  std::uint64_t seed = 0;
};

/// Mutual-nearest descriptor matches (query feature index, match feature
/// index) between two bundles, restricted to match features with a point.
std::vector<std::pair<int, int>> match_descriptors(const KeyframeBundle& query,
                                                   const KeyframeBundle& match,
                                                   const LoopVerifyOptions& options = {});

/// Random-sample consensus over descriptor matches: three-point rigid
/// hypotheses from the two keyframes' local maps, scored by the angle between
/// each query ray and the reprojected match point, then pnp_refine on the
/// inliers. Verified iff at least min_inliers survive; relative_pose is
/// match_T_query.
LoopCandidate verify_loop(LoopCandidate candidate, const KeyframeBundle& query,
                          const KeyframeBundle& match,
                          const std::vector<CameraExtrinsic>& extrinsics,
                          const LoopVerifyOptions& options = {});

}  // namespace mcvo
