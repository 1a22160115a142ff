#pragma once

#include <vector>

#include <Eigen/Core>

#include "mcvo/backend/state.hpp"
#include "mcvo/parallelism.hpp"

namespace mcvo {

/// Reprojection residual of one observation. Pose Jacobians are with respect
/// to (rotation, translation) increments applied as R <- R Exp(dtheta),
/// t <- t + dt.
struct ResidualBlock {
  bool valid = false;
  int anchor_slot = -1;
  int target_slot = -1;
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, 6> J_anchor = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Matrix<double, 2, 6> J_target = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Vector2d J_inverse_depth = Eigen::Vector2d::Zero();
};

/// Depth below which a transformed point is gated out.
inline constexpr double kMinProjectionDepth = 1e-6;

ResidualBlock reprojection_residual(const Pose& world_T_anchor, const Pose& world_T_target,
                                    const CameraExtrinsic& extrinsic,
                                    const Eigen::Vector3d& anchor_ray, double inverse_depth,
                                    const Eigen::Vector2d& observed);

/// Looks the landmark and both frames up in the state; invalid when any is
/// missing or the point is gated out.
ResidualBlock reprojection_residual(const SlidingWindowState& state, const ReprojObservation& obs);

/// Residuals of all state.observations, in order.
std::vector<ResidualBlock> evaluate_residuals(const SlidingWindowState& state,
                                              Parallelism parallelism = Parallelism::kOpenMP);

}  // namespace mcvo
