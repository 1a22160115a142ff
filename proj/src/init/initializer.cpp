#include "mcvo/init/initializer.hpp"

#include <cstdio>
#include <stdexcept>

namespace mcvo {

SlidingWindowState initialize_state(const RigConfig& rig,
                                    std::span<const CameraSfmTrajectory> trajectories,
                                    const ScaleEstimate& scales, int principal_camera,
                                    const FeatureTrackTable& tracks,
                                    const std::vector<double>& timestamps,
                                    const LandmarkInitOptions& options) {
  if (!scales.observable) throw std::invalid_argument("initialize_state: scales not observable");
  const CameraSfmTrajectory* principal = nullptr;
  int column = -1;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].camera == principal_camera) {
      principal = &trajectories[i];
      column = static_cast<int>(i);
    }
  }
  if (principal == nullptr || principal->poses.empty()) {
    throw std::invalid_argument("initialize_state: no trajectory for the principal camera");
  }
  const BodyTrajectoryHypothesis body = body_hypothesis(
      *principal, rig.cameras[principal_camera].extrinsic, scales.s(column));
  const Pose world_from_first = inverse(body.poses.back());

  SlidingWindowState state;
  for (const auto& cam : rig.cameras) state.extrinsics.push_back(cam.extrinsic);
  state.scales.assign(rig.size(), 1.0);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    state.scales[trajectories[i].camera] = scales.s(static_cast<Eigen::Index>(i));
  }
  for (std::size_t t = 0; t < body.poses.size(); ++t) {
    const int frame = principal->frames[t];
    const double stamp =
        frame < static_cast<int>(timestamps.size()) ? timestamps[frame] : 0.0;
    state.frames.push_back({frame, stamp, world_from_first * body.poses[t]});
  }
  triangulate_new_landmarks(state, rig, tracks, options);
  return state;
}

InitResult try_initialize(const RigConfig& rig, const FeatureTrackTable& tracks, int last_frame,
                          const std::vector<double>& timestamps, const InitOptions& options) {
  InitResult result;
  result.last_frame = last_frame;
  result.first_frame = last_frame - options.window_frames + 1;
  if (result.first_frame < 0) {
    result.failure = "not enough frames";
    return result;
  }
  result.readiness = check_initialization_ready(tracks, result.first_frame, last_frame,
                                                options.parallax_threshold);
  if (!result.readiness.ready) {
    result.failure = "insufficient parallax";
    return result;
  }

  const int n = rig.size();
  result.sfm.resize(n);
  if (options.parallelism == Parallelism::kOpenMP) {
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n; ++c) {
      result.sfm[c] = monocular_sfm_window(tracks, c, result.first_frame, last_frame,
                                           rig.cameras[c].intrinsic, options.sfm);
    }
  } else {
    for (int c = 0; c < n; ++c) {
      result.sfm[c] = monocular_sfm_window(tracks, c, result.first_frame, last_frame,
                                           rig.cameras[c].intrinsic, options.sfm);
    }
  }
  std::vector<CameraSfmTrajectory> trajectories;
  std::vector<CameraExtrinsic> extrinsics;
  for (int c = 0; c < n; ++c) {
    if (!result.sfm[c].ok) {
      result.failure = "camera " + std::to_string(c) + " sfm: " + result.sfm[c].failure;
      return result;
    }
    trajectories.push_back(result.sfm[c].trajectory);
    extrinsics.push_back(rig.cameras[c].extrinsic);
  }
  const ScaleSystem system = build_scale_system(trajectories, extrinsics);
  if (system.rows() < n) {
    result.failure = "scale system too small";
    return result;
  }
  result.scales = solve_scales(system, options.solve);
  if (!result.scales.observable) {
    result.failure = "scale unobservable: " + to_string(result.scales.status);
    return result;
  }
  result.state = initialize_state(rig, trajectories, result.scales,
                                  result.readiness.principal_camera, tracks, timestamps,
                                  options.landmarks);
  if (result.state.landmarks.empty()) {
    result.failure = "no landmarks triangulated";
    return result;
  }
  result.success = true;
  return result;
}

std::string format_init_report(const InitResult& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "window %d-%d %s\n", result.first_frame, result.last_frame,
                result.success ? "initialized" : ("failed: " + result.failure).c_str());
  out += line;
  if (result.readiness.principal_camera >= 0) {
    std::snprintf(line, sizeof line, "principal camera %d\n", result.readiness.principal_camera);
    out += line;
  }
  for (std::size_t c = 0; c < result.readiness.parallax.size(); ++c) {
    std::snprintf(line, sizeof line, "camera %zu parallax %.3f px\n", c,
                  result.readiness.parallax[c]);
    out += line;
  }
  for (std::size_t c = 0; c < result.sfm.size(); ++c) {
    const auto& s = result.sfm[c];
    std::snprintf(line, sizeof line, "camera %zu sfm %s inliers %d", c, s.ok ? "ok" : "failed",
                  s.trajectory.inliers);
    out += line;
    if (result.scales.s.size() == static_cast<Eigen::Index>(result.sfm.size())) {
      std::snprintf(line, sizeof line, " scale %.9g", result.scales.s(c));
      out += line;
    }
    out += "\n";
  }
  if (result.scales.s.size() > 0) {
    std::snprintf(line, sizeof line, "residual_rms %.9g condition %.9g status %s\n",
                  result.scales.residual_rms, result.scales.condition_number,
                  to_string(result.scales.status).c_str());
    out += line;
  }
  return out;
}

}  // namespace mcvo
