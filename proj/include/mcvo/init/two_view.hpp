#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/geometry/pose.hpp"

namespace mcvo {

struct RelativePoseOptions {
  int ransac_iterations = 200;
  /// Angular inlier threshold; 1 px at the camera's focal length.
  double inlier_threshold = 1.0 / 320.0;
  std::uint64_t seed = 0;
};

enum class RelativePoseFailure { kNone, kTooFewMatches, kLowParallax, kCheirality };

struct RelativePoseResult {
  bool ok = false;
  RelativePoseFailure failure = RelativePoseFailure::kNone;
  /// Pose of the second view in the first view's frame; |translation| = 1.
  Pose first_T_second;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

/// Essential matrix from unit bearing pairs (normalized eight-point inside
/// random-sample consensus), decomposed with cheirality disambiguation.
RelativePoseResult estimate_relative_pose(std::span<const Eigen::Vector3d> first,
                                          std::span<const Eigen::Vector3d> second,
                                          const RelativePoseOptions& options = {});

struct TriangulatedPoint {
  bool valid = false;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  /// Distances along each unit ray.
  double depth_first = 0.0;
  double depth_second = 0.0;
};

/// Midpoint triangulation of ray pairs given both camera poses (world_T_cam).
/// Rays closer than min_angle radians to parallel, or with a non-positive
/// depth in either view, come back invalid.
std::vector<TriangulatedPoint> triangulate(const Pose& first, const Pose& second,
                                           std::span<const Eigen::Vector3d> first_rays,
                                           std::span<const Eigen::Vector3d> second_rays,
                                           double min_angle = 1e-4);

/// Linear multi-view triangulation minimizing the summed squared distance to
/// every ray. Fails on non-positive depths or a widest ray angle below
/// min_angle.
std::optional<Eigen::Vector3d> triangulate_multiview(
    std::span<const Pose> world_T_cams, std::span<const Eigen::Vector3d> rays,
    double min_angle = 1e-4);

struct PnpCorrespondence {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d ray = Eigen::Vector3d::UnitZ();
  /// Camera pose in the frame being estimated (identity for a lone camera).
  Pose body_T_cam;
};

struct PnpOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

struct PnpResult {
  Pose pose;
  bool converged = false;
  int iterations = 0;
  double rms = 0.0;
};

/// Damped least-squares refinement of world_T_body against 3D-ray
/// correspondences, with residuals on the tangent plane of each observed ray.
/// Throws std::invalid_argument with fewer than four correspondences.
PnpResult pnp_refine(std::span<const PnpCorrespondence> correspondences,
                     const Pose& initial, const PnpOptions& options = {});

/// Single-camera convenience overload: returns world_T_cam.
PnpResult pnp_refine(std::span<const Eigen::Vector3d> points,
                     std::span<const Eigen::Vector3d> rays, const Pose& initial,
                     const PnpOptions& options = {});

/// Angle between a ray and the direction to a camera-frame point.
double ray_angle(const Eigen::Vector3d& ray, const Eigen::Vector3d& point_in_cam);

}  // namespace mcvo
