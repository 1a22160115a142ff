#include "support/fixtures.hpp"

#include "mcvo/frontend/admission.hpp"

#include <cmath>
#include <map>

namespace mcvo::testing {

Eigen::Quaterniond random_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  axis.normalize();
  return so3_exp(axis * u(rng));
}

Pose random_pose(std::mt19937_64& rng, double translation_scale) {
  std::uniform_real_distribution<double> u(-translation_scale, translation_scale);
  return Pose(random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

double max_abs_diff(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

double rotation_distance(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation.conjugate() * b.rotation);
}

Scene circle_scene(int frames, double speed, double radius, int landmarks,
                   const sim::NoiseSpec& noise, std::uint64_t seed, double min_depth,
                   double max_depth) {
  Scene scene;
  scene.rig = sim::default_rig();
  sim::TrajectorySpec spec;
  spec.kind = sim::TrajectoryKind::kCircle;
  spec.duration_frames = frames;
  spec.speed = speed;
  spec.radius = radius;
  spec.seed = seed;
  scene.trajectory = sim::generate_trajectory(spec);
  scene.cloud = sim::sample_landmarks(landmarks, scene.trajectory, min_depth, max_depth, seed + 7);
  scene.sim = sim::render_observations(scene.rig, scene.trajectory, scene.cloud, noise,
                                       sim::Parallelism::kSerial, spec.frame_rate);
  return scene;
}

SlidingWindowState window_from_scene(const Scene& scene, int first, int last) {
  SlidingWindowState state;
  for (const auto& cam : scene.rig.cameras) state.extrinsics.push_back(cam.extrinsic);
  state.scales.assign(scene.rig.size(), 1.0);
  state.capacity = last - first + 1;
  for (int f = first; f <= last; ++f) {
    state.frames.push_back({f, f / scene.sim.frame_rate, scene.trajectory[f]});
  }
  std::map<int, Eigen::Vector3d> positions;
  for (const auto& lm : scene.cloud.landmarks) positions[lm.id] = lm.position;

  for (int c = 0; c < scene.rig.size(); ++c) {
    for (const auto& [track_id, track] : scene.sim.tracks.tracks(c)) {
      const LandmarkId id = make_landmark_id(c, track_id);
      std::vector<ReprojObservation> obs;
      for (const auto& p : track) {
        if (p.frame < first || p.frame > last) continue;
        auto o = make_observation(scene.rig.cameras[c].intrinsic, c, id, p.frame, p.pixel);
        if (o) obs.push_back(*o);
      }
      if (obs.size() < 2) continue;
      const Eigen::Vector3d X = positions.at(scene.sim.track_landmark[c].at(track_id));
      auto lm = anchor_landmark(state, id, obs.front().frame, X);
      if (!lm) continue;
      lm->camera = c;
      state.landmarks[id] = *lm;
      state.observations.insert(state.observations.end(), obs.begin(), obs.end());
    }
  }
  return state;
}

LoopScenario loop_scenario(double laps, bool revisit, const sim::NoiseSpec& noise,
                           std::uint64_t seed, int stride, double max_depth) {
  LoopScenario out;
  out.stride = stride;
  Scene& scene = out.scene;
  scene.rig = sim::default_rig();
  const double radius = 10.0;
  const double speed = 2.0;
  sim::TrajectorySpec spec;
  spec.kind = revisit ? sim::TrajectoryKind::kCircle : sim::TrajectoryKind::kStraightLine;
  spec.speed = speed;
  spec.radius = radius;
  spec.duration_frames =
      static_cast<int>(std::lround(laps * 2.0 * M_PI * radius / speed * spec.frame_rate));
  spec.seed = seed;
  scene.trajectory = sim::generate_trajectory(spec);
  const int landmarks = revisit ? 3000 : 6000;
  scene.cloud = sim::sample_landmarks(landmarks, scene.trajectory, 2.0, max_depth, seed + 7);
  scene.sim = sim::render_observations(scene.rig, scene.trajectory, scene.cloud, noise,
                                       Parallelism::kOpenMP, spec.frame_rate);
  out.admitted = admit_tracks(scene.sim.tracks, scene.rig);

  std::map<int, Eigen::Vector3d> positions;
  for (const auto& lm : scene.cloud.landmarks) positions[lm.id] = lm.position;
  const WorldPointLookup lookup = [&](int camera, int track) -> std::optional<Eigen::Vector3d> {
    const auto& map = scene.sim.track_landmark[camera];
    const auto it = map.find(track);
    if (it == map.end()) return std::nullopt;
    return positions.at(it->second);
  };
  std::vector<Descriptor> training;
  for (int f = 0, id = 0; f < static_cast<int>(scene.trajectory.size()); f += stride, ++id) {
    out.keyframes.push_back(make_keyframe(id, f, f / spec.frame_rate, scene.trajectory[f],
                                          scene.rig, out.admitted, lookup));
    for (const auto& feat : out.keyframes.back().features) training.push_back(feat.descriptor);
  }
  out.vocabulary = build_vocabulary(training, 10, 3, seed);
  for (auto& kf : out.keyframes) kf.bow = bundle_bow(kf, out.vocabulary);
  return out;
}

}  // namespace mcvo::testing
