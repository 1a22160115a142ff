#include "mcvo/backend/residual.hpp"

namespace mcvo {

ResidualBlock reprojection_residual(const Pose& world_T_anchor, const Pose& world_T_target,
                                    const CameraExtrinsic& extrinsic,
                                    const Eigen::Vector3d& anchor_ray, double inverse_depth,
                                    const Eigen::Vector2d& observed) {
  ResidualBlock out;
  const Eigen::Matrix3d Re = extrinsic.cam_in_body.R();
  const Eigen::Vector3d& te = extrinsic.cam_in_body.translation;
  const Eigen::Matrix3d Ra = world_T_anchor.R();
  const Eigen::Matrix3d Rb = world_T_target.R();

  const Eigen::Vector3d p_a = anchor_ray / inverse_depth;
  const Eigen::Vector3d q_a = Re * p_a + te;
  const Eigen::Vector3d pw = Ra * q_a + world_T_anchor.translation;
  const Eigen::Vector3d q_b = Rb.transpose() * (pw - world_T_target.translation);
  const Eigen::Vector3d p_b = Re.transpose() * (q_b - te);
  if (!(p_b.z() > kMinProjectionDepth)) return out;

  const double iz = 1.0 / p_b.z();
  out.valid = true;
  out.r = p_b.head<2>() * iz - observed;

  Eigen::Matrix<double, 2, 3> proj;
  proj << iz, 0.0, -p_b.x() * iz * iz, 0.0, iz, -p_b.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> d_qb = proj * Re.transpose();
  const Eigen::Matrix<double, 2, 3> d_pw = d_qb * Rb.transpose();

  out.J_anchor.leftCols<3>() = -d_pw * Ra * skew(q_a);
  out.J_anchor.rightCols<3>() = d_pw;
  out.J_target.leftCols<3>() = d_qb * skew(q_b);
  out.J_target.rightCols<3>() = -d_pw;
  out.J_inverse_depth = d_pw * Ra * Re * (-anchor_ray / (inverse_depth * inverse_depth));
  return out;
}

ResidualBlock reprojection_residual(const SlidingWindowState& state, const ReprojObservation& obs) {
  const auto it = state.landmarks.find(obs.landmark);
  if (it == state.landmarks.end()) return {};
  const LandmarkState& lm = it->second;
  const int a = state.frame_slot(lm.anchor_frame);
  const int b = state.frame_slot(obs.frame);
  if (a < 0 || b < 0) return {};
  ResidualBlock out =
      reprojection_residual(state.frames[a].pose, state.frames[b].pose,
                            state.extrinsics[lm.camera], lm.anchor_ray, lm.inverse_depth,
                            obs.normalized);
  out.anchor_slot = a;
  out.target_slot = b;
  return out;
}

std::vector<ResidualBlock> evaluate_residuals(const SlidingWindowState& state,
                                              Parallelism parallelism) {
  const int n = static_cast<int>(state.observations.size());
  std::vector<ResidualBlock> out(n);
  if (parallelism == Parallelism::kOpenMP) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[i] = reprojection_residual(state, state.observations[i]);
  } else {
    for (int i = 0; i < n; ++i) out[i] = reprojection_residual(state, state.observations[i]);
  }
  return out;
}

}  // namespace mcvo
