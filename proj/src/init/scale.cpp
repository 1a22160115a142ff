#include "mcvo/init/scale.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace mcvo {

std::string to_string(ScaleStatus status) {
  switch (status) {
    case ScaleStatus::kOk:
      return "ok";
    case ScaleStatus::kIllConditioned:
      return "ill-conditioned";
    case ScaleStatus::kNonPositiveScale:
      return "non-positive scale";
    case ScaleStatus::kRankDeficient:
      return "rank deficient";
  }
  return "unknown";
}

InitReadiness check_initialization_ready(const FeatureTrackTable& tracks, int first_frame,
                                         int last_frame, double parallax_threshold) {
  InitReadiness out;
  out.ready = tracks.num_cameras() > 0;
  double best = -1.0;
  for (int c = 0; c < tracks.num_cameras(); ++c) {
    const double parallax = window_parallax(tracks, c, first_frame, last_frame);
    const double stability = track_stability(tracks, c, first_frame, last_frame);
    out.parallax.push_back(parallax);
    out.stability.push_back(stability);
    if (!(parallax > parallax_threshold)) out.ready = false;
    if (stability > best) {
      best = stability;
      out.principal_camera = c;
    }
  }
  return out;
}

BodyTrajectoryHypothesis body_hypothesis(const CameraSfmTrajectory& sfm,
                                         const CameraExtrinsic& ext, double s) {
  BodyTrajectoryHypothesis out;
  out.camera = sfm.camera;
  if (sfm.poses.empty()) return out;
  const Pose first_inv = inverse(body_pose_from_camera(sfm.poses.front(), ext, s));
  for (const auto& cam_pose : sfm.poses) {
    out.poses.push_back(first_inv * body_pose_from_camera(cam_pose, ext, s));
  }
  return out;
}

ScaleSystem build_scale_system(std::span<const CameraSfmTrajectory> trajectories,
                               std::span<const CameraExtrinsic> extrinsics) {
  const int n = static_cast<int>(trajectories.size());
  if (n < 2 || static_cast<int>(extrinsics.size()) != n) {
    throw std::invalid_argument("scale system needs >= 2 trajectories with extrinsics");
  }
  const std::size_t frames = trajectories.front().poses.size();
  for (const auto& t : trajectories) {
    if (t.poses.size() != frames) {
      throw std::invalid_argument("trajectories must cover the same frames");
    }
  }
  const int pairs = n * (n - 1) / 2;
  const int steps = frames > 0 ? static_cast<int>(frames) - 1 : 0;

  ScaleSystem sys;
  sys.num_cameras = n;
  sys.F = Eigen::MatrixXd::Zero(3 * steps * pairs, n);
  sys.theta = Eigen::VectorXd::Zero(3 * steps * pairs);

  // Per camera and frame: the scaled column r T and the offset t - r R r^T t.
  auto column = [&](int c, std::size_t t) -> Eigen::Vector3d {
    return extrinsics[c].cam_in_body.rotation * trajectories[c].poses[t].translation;
  };
  auto offset = [&](int c, std::size_t t) -> Eigen::Vector3d {
    const Pose& ext = extrinsics[c].cam_in_body;
    const Eigen::Quaterniond& R = trajectories[c].poses[t].rotation;
    return ext.translation - ext.rotation * (R * (ext.rotation.conjugate() * ext.translation));
  };

  int row = 0;
  for (std::size_t t = 1; t < frames; ++t) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        sys.F.block<3, 1>(row, i) = column(i, t);
        sys.F.block<3, 1>(row, j) = -column(j, t);
        sys.theta.segment<3>(row) = offset(i, t) - offset(j, t);
        row += 3;
      }
    }
  }
  if (sys.F.rows() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.F);
    sys.sigma_max = svd.singularValues()(0);
    sys.sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
  }
  return sys;
}

namespace {

/// RMS over row blocks of the 3-vector residual norm, in meters.
double block_rms(const ScaleSystem& system, const Eigen::VectorXd& s) {
  const double blocks = static_cast<double>(system.F.rows()) / 3.0;
  return std::sqrt((system.F * s + system.theta).squaredNorm() / blocks);
}

}  // namespace

ScaleEstimate solve_scales(const ScaleSystem& system, const ScaleSolveOptions& options) {
  const int n = static_cast<int>(system.F.cols());
  if (system.F.rows() < n || n == 0) {
    throw std::invalid_argument("scale system has fewer rows than unknowns");
  }
  ScaleEstimate est;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(system.F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  est.sigma_max = svd.singularValues()(0);
  est.sigma_min = svd.singularValues()(n - 1);
  est.condition_number = est.sigma_min > 0.0 ? est.sigma_max / est.sigma_min
                                             : std::numeric_limits<double>::infinity();

  if (!(est.sigma_max > 0.0) || est.sigma_min <= options.rank_tolerance * est.sigma_max) {
    // minimum-norm solution kept for diagnostics only
    svd.setThreshold(options.rank_tolerance);
    est.s = svd.solve(-system.theta);
    est.residual_rms = block_rms(system, est.s);
    est.status = ScaleStatus::kRankDeficient;
    est.observable = false;
    return est;
  }

  const Eigen::MatrixXd normal = system.F.transpose() * system.F;
  const Eigen::VectorXd rhs = -system.F.transpose() * system.theta;
  const auto ldlt = normal.ldlt();
  Eigen::VectorXd s = ldlt.solve(rhs);
  // one step of iterative refinement on the normal equations
  s += ldlt.solve(rhs - normal * s);

  if (options.mode == ScaleSolveMode::kLevenbergMarquardt) {
    // The residual is linear in s, so damped Gauss-Newton from s = 1 reaches
    // the same minimizer; kept to mirror an iterative solver configuration.
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    double mu = 1e-3;
    auto cost = [&](const Eigen::VectorXd& v) {
      return (system.F * v + system.theta).squaredNorm();
    };
    double c = cost(x);
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd g = system.F.transpose() * (system.F * x + system.theta);
      Eigen::MatrixXd A = normal;
      A.diagonal() += mu * normal.diagonal();
      const Eigen::VectorXd dx = A.ldlt().solve(-g);
      const double c_new = cost(x + dx);
      if (c_new <= c) {
        x += dx;
        c = c_new;
        mu = std::max(mu * 0.1, 1e-15);
      } else {
        mu *= 10.0;
      }
      if (dx.norm() < 1e-15 * std::max(1.0, x.norm())) break;
    }
    s = x;
  }

  est.s = s;
  est.residual_rms = block_rms(system, s);
  if (est.condition_number > options.max_condition) {
    est.status = ScaleStatus::kIllConditioned;
  } else if ((s.array() < options.min_scale).any()) {
    est.status = ScaleStatus::kNonPositiveScale;
  } else {
    est.status = ScaleStatus::kOk;
  }
  est.observable = est.status == ScaleStatus::kOk;
  return est;
}

}  // namespace mcvo
