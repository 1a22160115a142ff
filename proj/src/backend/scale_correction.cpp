#include "mcvo/backend/scale_correction.hpp"

#include <cmath>
#include <map>

#include "mcvo/init/two_view.hpp"

namespace mcvo {

std::vector<CameraSfmTrajectory> camera_window_trajectories(const SlidingWindowState& state,
                                                            int min_correspondences) {
  std::map<LandmarkId, Eigen::Vector3d> points;
  for (const auto& [id, lm] : state.landmarks) points[id] = landmark_world_point(state, lm);

  std::vector<CameraSfmTrajectory> out;
  for (int c = 0; c < state.num_cameras(); ++c) {
    const Pose& ext = state.extrinsics[c].cam_in_body;
    std::vector<std::vector<PnpCorrespondence>> per_frame(state.frames.size());
    for (const auto& obs : state.observations) {
      if (obs.camera != c) continue;
      const auto lm = state.landmarks.find(obs.landmark);
      if (lm == state.landmarks.end() || lm->second.anchor_frame == obs.frame) continue;
      const int slot = state.frame_slot(obs.frame);
      if (slot < 0) continue;
      PnpCorrespondence corr;
      corr.point = points.at(obs.landmark);
      corr.ray = Eigen::Vector3d(obs.normalized.x(), obs.normalized.y(), 1.0).normalized();
      corr.body_T_cam = ext;
      per_frame[slot].push_back(corr);
    }
    CameraSfmTrajectory traj;
    traj.camera = c;
    bool ok = true;
    std::vector<Pose> cam_poses;
    cam_poses.push_back(state.frames.front().pose * ext);
    for (std::size_t s = 1; s < state.frames.size() && ok; ++s) {
      if (static_cast<int>(per_frame[s].size()) < std::max(4, min_correspondences)) {
        ok = false;
        break;
      }
      const PnpResult r = pnp_refine(per_frame[s], state.frames[s].pose);
      if (!r.pose.translation.allFinite()) ok = false;
      cam_poses.push_back(r.pose * ext);
    }
    if (!ok) continue;
    const Pose anchor_inv = inverse(cam_poses.front());
    for (std::size_t s = 0; s < cam_poses.size(); ++s) {
      traj.frames.push_back(state.frames[s].frame);
      traj.poses.push_back(s == 0 ? Pose::Identity() : anchor_inv * cam_poses[s]);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

ScaleCorrectionReport correct_scale(SlidingWindowState& state,
                                    const ScaleCorrectionOptions& options) {
  ScaleCorrectionReport report;
  if (state.frames.size() < 2) {
    report.diagnostic = "window too short";
    return report;
  }
  std::vector<CameraSfmTrajectory> trajectories =
      camera_window_trajectories(state, options.min_correspondences);
  if (trajectories.empty()) {
    report.diagnostic = "no camera could be re-estimated over the window";
    return report;
  }
  std::vector<CameraExtrinsic> extrinsics;
  for (const auto& t : trajectories) {
    report.cameras.push_back(t.camera);
    extrinsics.push_back(state.extrinsics[t.camera]);
  }
  // the fused body trajectory enters as one more "camera" with identity extrinsic
  CameraSfmTrajectory body;
  body.camera = -1;
  const Pose body_anchor_inv = inverse(state.frames.front().pose);
  for (const auto& f : state.frames) {
    body.frames.push_back(f.frame);
    body.poses.push_back(body_anchor_inv * f.pose);
  }
  body.poses.front() = Pose::Identity();
  trajectories.push_back(body);
  extrinsics.push_back(CameraExtrinsic{});

  const ScaleSystem full = build_scale_system(trajectories, extrinsics);
  const int n = static_cast<int>(report.cameras.size());
  ScaleSystem reduced;
  reduced.num_cameras = n;
  reduced.F = full.F.leftCols(n);
  reduced.theta = full.theta + full.F.col(n);
  report.estimate = solve_scales(reduced, options.solve);
  report.observable = report.estimate.observable;
  if (!report.observable) {
    report.diagnostic = "scale correction skipped: " + to_string(report.estimate.status);
    state.diagnostics.push_back(report.diagnostic);
    return report;
  }
  if (state.scales.size() != static_cast<std::size_t>(state.num_cameras())) {
    state.scales.assign(state.num_cameras(), 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const double s = report.estimate.s(i);
    report.s.push_back(s);
    report.inflation.push_back(1.0 / s);
    if (std::abs(s - 1.0) <= options.deadband) continue;
    const int c = report.cameras[i];
    for (auto& [id, lm] : state.landmarks) {
      if (lm.camera == c) lm.inverse_depth /= s;
    }
    state.scales[c] *= s;
    report.applied = true;
  }
  return report;
}

}  // namespace mcvo
