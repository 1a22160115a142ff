#include "mcvo/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <omp.h>

namespace mcvo::sim {

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kCircle:
      return "circle";
    case TrajectoryKind::kLemniscate:
      return "lemniscate";
    case TrajectoryKind::kStraightLine:
      return "straight_line";
    case TrajectoryKind::kSmoothRandom:
      return "smooth_random";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  if (name == "circle") return TrajectoryKind::kCircle;
  if (name == "lemniscate") return TrajectoryKind::kLemniscate;
  if (name == "straight_line" || name == "straight") return TrajectoryKind::kStraightLine;
  if (name == "smooth_random") return TrajectoryKind::kSmoothRandom;
  throw std::invalid_argument("unknown trajectory kind '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

Pose yaw_pose(const Eigen::Vector3d& position, double yaw) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())),
              position);
}

/// Unwraps atan2 output so consecutive yaw samples stay continuous.
double unwrap(double previous, double current) {
  while (current - previous > M_PI) current -= 2.0 * M_PI;
  while (current - previous < -M_PI) current += 2.0 * M_PI;
  return current;
}

}  // namespace

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec) {
  if (spec.duration_frames < 11) {
    throw std::invalid_argument("trajectory needs at least 11 frames");
  }
  if (!(spec.frame_rate > 0.0) || !(spec.speed >= 0.0)) {
    throw std::invalid_argument("frame rate must be positive and speed non-negative");
  }
  const int n = spec.duration_frames;
  const double dt = 1.0 / spec.frame_rate;
  std::vector<Pose> out;
  out.reserve(n);

  switch (spec.kind) {
    case TrajectoryKind::kCircle: {
      const double radius = spec.radius > 0.0
                                ? spec.radius
                                : spec.path_length() / (2.0 * M_PI * spec.laps);
      const double dphi = spec.speed * dt / radius;
      for (int k = 0; k < n; ++k) {
        const double phi = k * dphi;
        out.push_back(yaw_pose(
            Eigen::Vector3d(radius * std::sin(phi), radius * (1.0 - std::cos(phi)), 0.0),
            phi));
      }
      break;
    }
    case TrajectoryKind::kLemniscate: {
      // Lemniscate of Gerono; one full figure-eight is about 6.097 * A long.
      const double amplitude = std::max(1.0, spec.path_length() / 6.097);
      const double omega = 2.0 * M_PI / (n * dt);
      double yaw = 0.0;
      for (int k = 0; k < n; ++k) {
        const double phi = omega * k * dt;
        const Eigen::Vector3d p(amplitude * std::sin(phi),
                                0.5 * amplitude * std::sin(2.0 * phi), 0.0);
        const double dx = amplitude * std::cos(phi);
        const double dy = amplitude * std::cos(2.0 * phi);
        yaw = k == 0 ? std::atan2(dy, dx) : unwrap(yaw, std::atan2(dy, dx));
        out.push_back(yaw_pose(p, yaw));
      }
      break;
    }
    case TrajectoryKind::kStraightLine: {
      for (int k = 0; k < n; ++k) {
        out.push_back(Pose(Eigen::Quaterniond::Identity(),
                           Eigen::Vector3d(spec.speed * k * dt, 0.0, 0.0)));
      }
      break;
    }
    case TrajectoryKind::kSmoothRandom: {
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double duration = n * dt;
      const double v = std::max(spec.speed, 1e-3);
      struct Wave {
        double amp, freq, phase;
      };
      auto make_waves = [&](double rate_budget) {
        std::vector<Wave> waves(3);
        for (auto& w : waves) {
          w.freq = 2.0 * M_PI * (0.5 + 2.0 * unit(rng)) / duration;
          w.phase = 2.0 * M_PI * unit(rng);
          // amp * freq bounded so the forward speed never reverses
          w.amp = rate_budget * (0.3 + 0.7 * unit(rng)) / (3.0 * w.freq);
        }
        return waves;
      };
      const auto wx = make_waves(0.4 * v);
      const auto wy = make_waves(1.0 * v);
      const auto wz = make_waves(0.05 * v);
      auto eval = [](const std::vector<Wave>& ws, double t, double& value, double& rate) {
        value = 0.0;
        rate = 0.0;
        for (const auto& w : ws) {
          value += w.amp * std::sin(w.freq * t + w.phase);
          rate += w.amp * w.freq * std::cos(w.freq * t + w.phase);
        }
      };
      double yaw = 0.0;
      for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        double x, dx, y, dy, z, dz;
        eval(wx, t, x, dx);
        eval(wy, t, y, dy);
        eval(wz, t, z, dz);
        x += v * t;
        dx += v;
        const double heading = std::atan2(dy, dx);
        yaw = k == 0 ? heading : unwrap(yaw, heading);
        out.push_back(yaw_pose(Eigen::Vector3d(x, y, z), yaw));
      }
      break;
    }
  }
  return out;
}

LandmarkCloud sample_landmarks(int count, const std::vector<Pose>& trajectory,
                               double min_depth, double max_depth,
                               std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("landmark count must be positive");
  if (!(min_depth > 0.0) || !(min_depth < max_depth)) {
    throw std::invalid_argument("depth range must satisfy 0 < min < max");
  }
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, trajectory.size() - 1);

  LandmarkCloud cloud;
  cloud.min_depth = min_depth;
  cloud.max_depth = max_depth;
  cloud.landmarks.reserve(count);

  const double min2 = min_depth * min_depth;
  int attempts = 0;
  while (static_cast<int>(cloud.landmarks.size()) < count) {
    if (++attempts > 1000 * count) {
      throw std::runtime_error("could not place landmarks in the requested depth range");
    }
    const Pose& anchor = trajectory[pick(rng)];
    const double azimuth = 2.0 * M_PI * unit(rng);
    const double elevation = -0.35 + 0.95 * unit(rng);
    const double distance = min_depth + (max_depth - min_depth) * unit(rng);
    const Eigen::Vector3d dir(std::cos(elevation) * std::cos(azimuth),
                              std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    const Eigen::Vector3d p = anchor.translation + distance * dir;

    double nearest2 = std::numeric_limits<double>::infinity();
    for (const auto& pose : trajectory) {
      nearest2 = std::min(nearest2, (pose.translation - p).squaredNorm());
    }
    if (nearest2 < min2) continue;

    Landmark lm;
    lm.id = static_cast<int>(cloud.landmarks.size());
    lm.position = p;
    for (auto& word : lm.descriptor) word = rng();
    cloud.landmarks.push_back(lm);
  }
  return cloud;
}

namespace {

struct CameraRender {
  std::vector<std::vector<FrameObservation>> per_frame;
  std::map<int, int> track_landmark;
  int empty_frames = 0;
};

CameraRender render_camera(const Camera& camera, int camera_index,
                           const std::vector<Pose>& trajectory,
                           const LandmarkCloud& cloud, const NoiseSpec& noise) {
  std::mt19937_64 rng(derive_seed(noise.seed, static_cast<std::uint64_t>(camera_index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool flip = noise.descriptor_flip_rate > 0.0;
  std::geometric_distribution<int> gap(flip ? noise.descriptor_flip_rate : 0.5);

  CameraRender out;
  out.per_frame.resize(trajectory.size());
  std::vector<int> previous(cloud.landmarks.size(), -1);
  std::vector<int> current(cloud.landmarks.size(), -1);
  int next_id = 0;

  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    const Pose cam_T_world = inverse(trajectory[f] * camera.extrinsic.cam_in_body);
    std::fill(current.begin(), current.end(), -1);
    auto& frame_obs = out.per_frame[f];
    for (std::size_t l = 0; l < cloud.landmarks.size(); ++l) {
      const Landmark& lm = cloud.landmarks[l];
      const Eigen::Vector3d pc = cam_T_world * lm.position;
      const double dist = pc.norm();
      if (dist < cloud.min_depth || dist > cloud.max_depth) continue;
      const auto px = project(pc, camera.intrinsic);
      if (!px || !camera.intrinsic.in_image(*px)) continue;

      int id = previous[l];
      if (id >= 0 && unit(rng) < noise.dropout_prob) id = -1;
      if (id < 0) {
        id = next_id++;
        out.track_landmark[id] = lm.id;
      }
      current[l] = id;

      Eigen::Vector2d pixel = *px;
      if (noise.pixel_sigma > 0.0) {
        pixel.x() += noise.pixel_sigma * gauss(rng);
        pixel.y() += noise.pixel_sigma * gauss(rng);
      }
      Descriptor desc = lm.descriptor;
      if (flip) {
        for (int bit = gap(rng); bit < 256; bit += 1 + gap(rng)) flip_bit(desc, bit);
      }
      frame_obs.push_back(FrameObservation{id, pixel, desc});
    }
    if (frame_obs.empty()) ++out.empty_frames;
    std::swap(previous, current);
  }
  return out;
}

}  // namespace

SimOutput render_observations(const RigConfig& rig, const std::vector<Pose>& trajectory,
                              const LandmarkCloud& cloud, const NoiseSpec& noise,
                              Parallelism parallelism, double frame_rate) {
  if (noise.pixel_sigma < 0.0 || noise.dropout_prob < 0.0 || noise.dropout_prob > 1.0 ||
      noise.descriptor_flip_rate < 0.0 || noise.descriptor_flip_rate >= 1.0) {
    throw std::invalid_argument("noise parameters out of range");
  }
  const int num_cameras = rig.size();
  std::vector<CameraRender> renders(num_cameras);

  if (parallelism == Parallelism::kOpenMP) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < num_cameras; ++c) {
      renders[c] = render_camera(rig.cameras[c], c, trajectory, cloud, noise);
    }
  } else {
    for (int c = 0; c < num_cameras; ++c) {
      renders[c] = render_camera(rig.cameras[c], c, trajectory, cloud, noise);
    }
  }

  SimOutput out;
  out.gt_body_trajectory = trajectory;
  out.frame_rate = frame_rate;
  out.tracks = FeatureTrackTable(num_cameras);
  out.track_landmark.resize(num_cameras);
  std::vector<std::vector<FrameObservation>> frame(num_cameras);
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    for (int c = 0; c < num_cameras; ++c) frame[c] = std::move(renders[c].per_frame[f]);
    update_track_table(out.tracks, static_cast<int>(f), frame);
  }
  for (int c = 0; c < num_cameras; ++c) {
    out.track_landmark[c] = std::move(renders[c].track_landmark);
    if (2 * renders[c].empty_frames > static_cast<int>(trajectory.size())) {
      out.diagnostics.push_back("warning: camera " + std::to_string(c) +
                                " sees no landmarks in more than half of the frames");
    }
  }
  return out;
}

std::vector<CameraSfmTrajectory> make_scale_ambiguous_sfm(
    const RigConfig& rig, const std::vector<Pose>& trajectory,
    const std::vector<double>& s_true) {
  if (static_cast<int>(s_true.size()) != rig.size()) {
    throw std::invalid_argument("one scale per camera required");
  }
  if (trajectory.size() < 2) throw std::invalid_argument("trajectory too short");
  std::vector<CameraSfmTrajectory> out;
  for (int c = 0; c < rig.size(); ++c) {
    if (!(s_true[c] > 0.0)) throw std::invalid_argument("scales must be positive");
    const Pose& ext = rig.cameras[c].extrinsic.cam_in_body;
    const Pose anchor_inv = inverse(trajectory.front() * ext);
    CameraSfmTrajectory traj;
    traj.camera = c;
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
      Pose p = anchor_inv * (trajectory[t] * ext);
      if (t == 0) p = Pose::Identity();
      p.translation /= s_true[c];
      traj.frames.push_back(static_cast<int>(t));
      traj.poses.push_back(p);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

RigConfig default_rig() {
  CameraIntrinsic pinhole;
  pinhole.model = CameraModel::kPinhole;
  pinhole.fx = pinhole.fy = 320.0;
  pinhole.cx = 320.0;
  pinhole.cy = 240.0;
  pinhole.fov_limit = 1.2;
  pinhole.width = 640;
  pinhole.height = 480;

  CameraIntrinsic fisheye;
  fisheye.model = CameraModel::kEquidistant;
  fisheye.fx = fisheye.fy = 200.0;
  fisheye.cx = fisheye.cy = 320.0;
  fisheye.fov_limit = M_PI_2;
  fisheye.width = 640;
  fisheye.height = 640;

  // columns: camera x, y, z axes in body coordinates (camera y points down)
  auto axes = [](const Eigen::Vector3d& x, const Eigen::Vector3d& z) {
    Eigen::Matrix3d R;
    R.col(0) = x;
    R.col(1) = z.cross(x);
    R.col(2) = z;
    return R;
  };
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();

  RigConfig rig;
  rig.cameras.push_back({pinhole, {Pose(axes(-ey, ex), Eigen::Vector3d(1.0, 0.2, 0.3))}});
  rig.cameras.push_back({pinhole, {Pose(axes(ey, -ex), Eigen::Vector3d(-1.0, -0.2, 0.3))}});
  rig.cameras.push_back({fisheye, {Pose(axes(ex, ey), Eigen::Vector3d(0.1, 0.8, 0.3))}});
  rig.cameras.push_back({fisheye, {Pose(axes(-ex, -ey), Eigen::Vector3d(-0.1, -0.8, 0.3))}});
  return rig;
}

}  // namespace mcvo::sim
