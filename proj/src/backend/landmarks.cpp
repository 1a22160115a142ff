#include "mcvo/backend/landmarks.hpp"

#include <algorithm>

#include "mcvo/init/two_view.hpp"

namespace mcvo {

int add_frame_observations(SlidingWindowState& state, const RigConfig& rig,
                           const FeatureTrackTable& tracks, int frame) {
  int added = 0;
  for (int c = 0; c < rig.size(); ++c) {
    for (const auto& [track, point] : tracks.observations_at(c, frame)) {
      const LandmarkId id = make_landmark_id(c, track);
      if (!state.landmarks.count(id)) continue;
      if (auto obs = make_observation(rig.cameras[c].intrinsic, c, id, frame, point.pixel)) {
        state.observations.push_back(*obs);
        ++added;
      }
    }
  }
  return added;
}

int triangulate_new_landmarks(SlidingWindowState& state, const RigConfig& rig,
                              const FeatureTrackTable& tracks, const LandmarkInitOptions& options) {
  if (state.frames.empty()) return 0;
  const int first = state.frames.front().frame;
  const int last = state.frames.back().frame;
  int created = 0;
  for (int c = 0; c < rig.size(); ++c) {
    const Camera& cam = rig.cameras[c];
    const double gate = options.max_error_sigmas * kObservationSigmaPx / cam.intrinsic.fx;
    for (const auto& [track_id, track] : tracks.tracks(c)) {
      if (track.empty() || track.back().frame < first || track.front().frame > last) continue;
      const LandmarkId id = make_landmark_id(c, track_id);
      if (state.landmarks.count(id)) continue;

      std::vector<ReprojObservation> obs;
      std::vector<Pose> poses;
      std::vector<Eigen::Vector3d> rays;
      for (const auto& p : track) {
        const FrameState* f = state.find_frame(p.frame);
        if (f == nullptr) continue;
        auto o = make_observation(cam.intrinsic, c, id, p.frame, p.pixel);
        if (!o) continue;
        obs.push_back(*o);
        poses.push_back(f->pose * cam.extrinsic.cam_in_body);
        rays.push_back(Eigen::Vector3d(o->normalized.x(), o->normalized.y(), 1.0).normalized());
      }
      if (static_cast<int>(obs.size()) < options.min_observations) continue;
      const auto X = triangulate_multiview(poses, rays, options.min_ray_angle);
      if (!X) continue;
      bool good = true;
      for (std::size_t i = 0; i < poses.size() && good; ++i) {
        const Eigen::Vector3d pc = inverse(poses[i]) * *X;
        if (!(pc.z() > options.min_depth) || pc.z() > options.max_depth ||
            ray_angle(rays[i], pc) > gate) {
          good = false;
        }
      }
      if (!good) continue;

      LandmarkState lm;
      lm.id = id;
      lm.camera = c;
      lm.anchor_frame = obs.front().frame;
      lm.anchor_ray = Eigen::Vector3d(obs.front().normalized.x(), obs.front().normalized.y(), 1.0);
      double depth = (inverse(poses.front()) * *X).z();
      if (c < static_cast<int>(options.depth_bias.size())) depth *= options.depth_bias[c];
      lm.inverse_depth = 1.0 / depth;
      state.landmarks[id] = lm;
      state.observations.insert(state.observations.end(), obs.begin(), obs.end());
      ++created;
    }
  }
  return created;
}

}  // namespace mcvo
