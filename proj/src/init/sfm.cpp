#include "mcvo/init/sfm.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

namespace mcvo {

namespace {

/// Track id -> (window slot -> unit ray).
using RayTable = std::map<int, std::map<int, Eigen::Vector3d>>;

RayTable collect_rays(const FeatureTrackTable& tracks, int camera, int first, int last,
                      const CameraIntrinsic& intr) {
  RayTable rays;
  for (const auto& [id, track] : tracks.tracks(camera)) {
    for (const auto& p : track) {
      if (p.frame < first || p.frame > last) continue;
      if (auto ray = unproject(p.pixel, intr)) rays[id][p.frame - first] = *ray;
    }
  }
  return rays;
}

std::optional<Eigen::Vector3d> triangulate_track(const std::map<int, Eigen::Vector3d>& obs,
                                                 const std::vector<std::optional<Pose>>& poses,
                                                 double min_angle, double max_error) {
  std::vector<Pose> cams;
  std::vector<Eigen::Vector3d> rays;
  for (const auto& [slot, ray] : obs) {
    if (!poses[slot]) continue;
    cams.push_back(*poses[slot]);
    rays.push_back(ray);
  }
  if (cams.size() < 2) return std::nullopt;
  auto p = triangulate_multiview(cams, rays, min_angle);
  if (!p) return std::nullopt;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (ray_angle(rays[i], inverse(cams[i]) * *p) > max_error) return std::nullopt;
  }
  return p;
}

std::vector<PnpCorrespondence> correspondences_for(int slot, const RayTable& rays,
                                                   const std::map<int, Eigen::Vector3d>& points) {
  std::vector<PnpCorrespondence> out;
  for (const auto& [id, p] : points) {
    auto it = rays.find(id);
    if (it == rays.end()) continue;
    auto obs = it->second.find(slot);
    if (obs == it->second.end()) continue;
    PnpCorrespondence c;
    c.point = p;
    c.ray = obs->second;
    out.push_back(c);
  }
  return out;
}

Eigen::Matrix<double, 3, 2> tangent_basis(const Eigen::Vector3d& u) {
  const Eigen::Vector3d a =
      std::abs(u.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = u.cross(a).normalized();
  B.col(1) = u.cross(B.col(0));
  return B;
}

struct RayResidual {
  bool valid = false;
  Eigen::Vector2d r;
  Eigen::Matrix<double, 2, 6> J_pose;
  Eigen::Matrix<double, 2, 3> J_point;
};

RayResidual ray_residual(const Pose& world_T_cam, const Eigen::Vector3d& X,
                         const Eigen::Vector3d& ray) {
  RayResidual out;
  const Eigen::Matrix3d Rt = world_T_cam.rotation.toRotationMatrix().transpose();
  const Eigen::Vector3d P = Rt * (X - world_T_cam.translation);
  const double n = P.norm();
  if (!(n > 1e-9) || P.dot(ray) <= 0.0) return out;
  const Eigen::Vector3d v = P / n;
  const Eigen::Matrix<double, 3, 2> B = tangent_basis(ray);
  const Eigen::Matrix<double, 2, 3> D = B.transpose() * (Eigen::Matrix3d::Identity() - v * v.transpose()) / n;
  out.valid = true;
  out.r = B.transpose() * v;
  out.J_pose.leftCols<3>() = D * skew(P);
  out.J_pose.rightCols<3>() = -D * Rt;
  out.J_point = D * Rt;
  return out;
}

/// Levenberg-Marquardt over every pose but `fixed` and all points, with the
/// points eliminated through the Schur complement.
void bundle_adjust(std::vector<std::optional<Pose>>& poses, std::map<int, Eigen::Vector3d>& points,
                   const RayTable& rays, int fixed, int iterations) {
  const int slots = static_cast<int>(poses.size());
  std::vector<int> var(slots, -1);
  int np = 0;
  for (int s = 0; s < slots; ++s) {
    if (s != fixed && poses[s]) var[s] = np++;
  }
  np *= 6;
  auto cost_of = [&](const std::vector<std::optional<Pose>>& ps,
                     const std::map<int, Eigen::Vector3d>& pts) {
    double c = 0.0;
    for (const auto& [id, X] : pts) {
      for (const auto& [slot, ray] : rays.at(id)) {
        if (!ps[slot]) continue;
        const RayResidual rr = ray_residual(*ps[slot], X, ray);
        c += rr.valid ? rr.r.squaredNorm() : 1.0;
      }
    }
    return c;
  };
  double cost = cost_of(poses, points);
  double mu = 1e-4;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd Hpp = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd gp = Eigen::VectorXd::Zero(np);
    struct PointBlock {
      int id;
      Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
      Eigen::Vector3d g = Eigen::Vector3d::Zero();
      Eigen::MatrixXd W;  // np x 3
    };
    std::vector<PointBlock> blocks;
    blocks.reserve(points.size());
    for (const auto& [id, X] : points) {
      PointBlock pb;
      pb.id = id;
      pb.W = Eigen::MatrixXd::Zero(np, 3);
      for (const auto& [slot, ray] : rays.at(id)) {
        if (!poses[slot]) continue;
        const RayResidual rr = ray_residual(*poses[slot], X, ray);
        if (!rr.valid) continue;
        pb.H += rr.J_point.transpose() * rr.J_point;
        pb.g += rr.J_point.transpose() * rr.r;
        const int v = var[slot];
        if (v < 0) continue;
        Hpp.block<6, 6>(6 * v, 6 * v) += rr.J_pose.transpose() * rr.J_pose;
        gp.segment<6>(6 * v) += rr.J_pose.transpose() * rr.r;
        pb.W.middleRows<6>(6 * v) += rr.J_pose.transpose() * rr.J_point;
      }
      blocks.push_back(std::move(pb));
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::MatrixXd S = Hpp;
      S.diagonal() += mu * Hpp.diagonal().cwiseMax(1e-9);
      Eigen::VectorXd rhs = -gp;
      std::vector<Eigen::Matrix3d> inv(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        Eigen::Matrix3d Hd = blocks[b].H;
        Hd.diagonal() += mu * blocks[b].H.diagonal().cwiseMax(1e-9);
        inv[b] = Hd.inverse();
        S.noalias() -= blocks[b].W * inv[b] * blocks[b].W.transpose();
        rhs.noalias() += blocks[b].W * (inv[b] * blocks[b].g);
      }
      const Eigen::VectorXd dp = S.ldlt().solve(rhs);
      auto trial_poses = poses;
      auto trial_points = points;
      for (int s = 0; s < slots; ++s) {
        if (var[s] < 0) continue;
        Pose& p = *trial_poses[s];
        p.rotation = (p.rotation * so3_exp(dp.segment<3>(6 * var[s]))).normalized();
        p.translation += dp.segment<3>(6 * var[s] + 3);
      }
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        trial_points[blocks[b].id] -= inv[b] * (blocks[b].g + blocks[b].W.transpose() * dp);
      }
      const double trial = dp.allFinite() ? cost_of(trial_poses, trial_points) : cost;
      if (trial < cost) {
        improved = true;
        const bool done = cost - trial < 1e-12 * cost;
        poses = std::move(trial_poses);
        points = std::move(trial_points);
        cost = trial;
        mu = std::max(mu / 3.0, 1e-12);
        if (done) return;
      } else {
        mu *= 10.0;
      }
    }
    if (!improved) return;
  }
}

}  // namespace

SfmResult monocular_sfm_window(const FeatureTrackTable& tracks, int camera, int first_frame,
                               int last_frame, const CameraIntrinsic& intrinsic,
                               const SfmOptions& options) {
  SfmResult result;
  result.trajectory.camera = camera;
  const int slots = last_frame - first_frame + 1;
  if (slots < 2) {
    result.failure = "window too short";
    return result;
  }
  const RayTable rays = collect_rays(tracks, camera, first_frame, last_frame, intrinsic);
  const double threshold = options.relative.inlier_threshold;
  const double max_error = 5.0 * threshold;

  // widest-parallax frame pair among pairs sharing enough tracks
  int best_i = -1, best_j = -1;
  double best_parallax = -1.0;
  for (int i = 0; i < slots; ++i) {
    for (int j = i + 1; j < slots; ++j) {
      double sum = 0.0;
      int shared = 0;
      for (const auto& [id, obs] : rays) {
        auto a = obs.find(i);
        auto b = obs.find(j);
        if (a == obs.end() || b == obs.end()) continue;
        sum += ray_angle(a->second, b->second);
        ++shared;
      }
      if (shared < options.min_shared_tracks) continue;
      const double parallax = sum / shared;
      if (parallax > best_parallax) {
        best_parallax = parallax;
        best_i = i;
        best_j = j;
      }
    }
  }
  if (best_i < 0) {
    result.failure = "fewer than " + std::to_string(options.min_shared_tracks) +
                     " shared tracks between any frame pair";
    return result;
  }

  std::vector<int> pair_ids;
  std::vector<Eigen::Vector3d> first_rays, second_rays;
  for (const auto& [id, obs] : rays) {
    auto a = obs.find(best_i);
    auto b = obs.find(best_j);
    if (a == obs.end() || b == obs.end()) continue;
    pair_ids.push_back(id);
    first_rays.push_back(a->second);
    second_rays.push_back(b->second);
  }
  const RelativePoseResult rel = estimate_relative_pose(first_rays, second_rays, options.relative);
  if (!rel.ok) {
    switch (rel.failure) {
      case RelativePoseFailure::kLowParallax:
        result.failure = "low parallax: relative translation undetermined";
        break;
      case RelativePoseFailure::kCheirality:
        result.failure = "cheirality check failed";
        break;
      default:
        result.failure = "too few relative-pose inliers";
        break;
    }
    return result;
  }
  result.trajectory.inliers = rel.inlier_count;

  std::vector<std::optional<Pose>> poses(slots);
  poses[best_i] = Pose::Identity();
  poses[best_j] = rel.first_T_second;

  std::map<int, Eigen::Vector3d> points;
  {
    const auto tri = triangulate(Pose::Identity(), rel.first_T_second, first_rays, second_rays,
                                 options.min_triangulation_angle);
    for (std::size_t k = 0; k < pair_ids.size(); ++k) {
      if (rel.inliers[k] && tri[k].valid) points[pair_ids[k]] = tri[k].point;
    }
  }
  auto extend_points = [&] {
    for (const auto& [id, obs] : rays) {
      if (points.count(id)) continue;
      if (auto p = triangulate_track(obs, poses, options.min_triangulation_angle, max_error)) {
        points[id] = *p;
      }
    }
  };
  extend_points();

  // register the remaining frames, most-constrained first
  for (int solved = 2; solved < slots; ++solved) {
    int next = -1;
    std::size_t next_count = 0;
    for (int s = 0; s < slots; ++s) {
      if (poses[s]) continue;
      const std::size_t count = correspondences_for(s, rays, points).size();
      if (next < 0 || count > next_count) {
        next = s;
        next_count = count;
      }
    }
    const auto corr = correspondences_for(next, rays, points);
    if (static_cast<int>(corr.size()) < options.min_pnp_correspondences) {
      result.failure = "frame " + std::to_string(first_frame + next) +
                       " has too few 3D-2D correspondences";
      return result;
    }
    int nearest = -1;
    for (int s = 0; s < slots; ++s) {
      if (poses[s] && (nearest < 0 || std::abs(s - next) < std::abs(nearest - next))) nearest = s;
    }
    const PnpResult pnp = pnp_refine(corr, *poses[nearest]);
    if (!pnp.converged) {
      result.failure = "pnp diverged at frame " + std::to_string(first_frame + next);
      return result;
    }
    poses[next] = pnp.pose;
    extend_points();
  }

  for (int round = 0; round < options.refinement_rounds; ++round) {
    std::map<int, Eigen::Vector3d> refreshed;
    for (const auto& [id, obs] : rays) {
      if (auto p = triangulate_track(obs, poses, options.min_triangulation_angle, max_error)) {
        refreshed[id] = *p;
      }
    }
    points = std::move(refreshed);
    for (int s = 0; s < slots; ++s) {
      if (s == best_i) continue;
      const auto corr = correspondences_for(s, rays, points);
      if (static_cast<int>(corr.size()) < options.min_pnp_correspondences) continue;
      const PnpResult pnp = pnp_refine(corr, *poses[s]);
      if (pnp.converged) poses[s] = pnp.pose;
    }
  }

  bundle_adjust(poses, points, rays, best_i, options.bundle_iterations);
  std::erase_if(points, [&](const auto& entry) {
    for (const auto& [slot, ray] : rays.at(entry.first)) {
      if (ray_angle(ray, inverse(*poses[slot]) * entry.second) > max_error) return true;
    }
    return false;
  });

  const Pose anchor_inv = inverse(*poses[0]);
  const double baseline =
      (poses[best_j]->translation - poses[best_i]->translation).norm();
  if (!(baseline > 0.0)) {
    result.failure = "degenerate baseline";
    return result;
  }
  for (int s = 0; s < slots; ++s) {
    Pose p = s == 0 ? Pose::Identity() : anchor_inv * *poses[s];
    p.translation /= baseline;
    result.trajectory.frames.push_back(first_frame + s);
    result.trajectory.poses.push_back(p);
  }
  for (const auto& [id, p] : points) result.points[id] = (anchor_inv * p) / baseline;
  result.pair_first = first_frame + best_i;
  result.pair_second = first_frame + best_j;
  result.ok = true;
  return result;
}

}  // namespace mcvo
