#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/frontend/descriptor.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/geometry/pose.hpp"
#include "mcvo/init/types.hpp"
#include "mcvo/parallelism.hpp"

namespace mcvo::sim {

enum class TrajectoryKind { kCircle, kLemniscate, kStraightLine, kSmoothRandom };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& name);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kCircle;
  int duration_frames = 100;
  double frame_rate = 10.0;
  double speed = 1.0;
  std::uint64_t seed = 0;
  /// Circle radius; 0 derives it so the run covers exactly `laps` laps.
  double radius = 0.0;
  double laps = 1.0;

  double path_length() const { return speed * duration_frames / frame_rate; }
};

struct Landmark {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Descriptor descriptor{};
};

struct LandmarkCloud {
  std::vector<Landmark> landmarks;
  /// Distance band used both for sampling and for visibility.
  double min_depth = 1.0;
  double max_depth = 30.0;
};

struct NoiseSpec {
  double pixel_sigma = 0.0;
  double dropout_prob = 0.0;
  double descriptor_flip_rate = 0.0;
  std::uint64_t seed = 0;
};

struct SimOutput {
  std::vector<Pose> gt_body_trajectory;
  double frame_rate = 10.0;
  /// Observations carry their descriptor in TrackPoint::descriptor.
  FeatureTrackTable tracks;
  /// (camera, track id) -> landmark id.
  std::vector<std::map<int, int>> track_landmark;
  std::vector<double> gt_scales;
  std::vector<std::string> diagnostics;
};

/// Body poses (world_T_body). Body axes: x forward, y left, z up; curved paths
/// yaw tangent to the path, straight lines keep identity orientation.
std::vector<Pose> generate_trajectory(const TrajectorySpec& spec);

/// Landmarks whose distance to the nearest trajectory position lies in
/// [min_depth, max_depth].
LandmarkCloud sample_landmarks(int count, const std::vector<Pose>& trajectory,
                               double min_depth, double max_depth,
                               std::uint64_t seed);

using ::mcvo::Parallelism;

/// Renders every camera independently with a seed derived from
/// (noise.seed, camera), so serial and OpenMP runs agree bitwise.
SimOutput render_observations(const RigConfig& rig,
                              const std::vector<Pose>& trajectory,
                              const LandmarkCloud& cloud, const NoiseSpec& noise,
                              Parallelism parallelism = Parallelism::kOpenMP,
                              double frame_rate = 10.0);

/// Exact camera trajectories re-anchored at frame 0 with every translation
/// divided by s_true[c].
std::vector<CameraSfmTrajectory> make_scale_ambiguous_sfm(
    const RigConfig& rig, const std::vector<Pose>& trajectory,
    const std::vector<double>& s_true);

/// Four-camera rig: forward and rear pinhole cameras, left and right
/// equidistant fisheye cameras, with lever arms of about one meter.
RigConfig default_rig();

/// Derives a per-stream seed from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mcvo::sim
