#pragma once

#include <random>

#include "mcvo/backend/state.hpp"
#include "mcvo/geometry/pose.hpp"
#include "mcvo/loop/keyframe_database.hpp"
#include "mcvo/loop/vocabulary.hpp"
#include "mcvo/sim/simulator.hpp"

namespace mcvo::testing {

Eigen::Quaterniond random_rotation(std::mt19937_64& rng, double max_angle = 3.0);
Pose random_pose(std::mt19937_64& rng, double translation_scale = 5.0);

/// Absolute 4x4 matrix comparison helper.
double max_abs_diff(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b);
double rotation_distance(const Pose& a, const Pose& b);

struct Scene {
  RigConfig rig;
  std::vector<Pose> trajectory;
  sim::LandmarkCloud cloud;
  sim::SimOutput sim;
};

/// Circle-driving scene rendered through the default rig.
Scene circle_scene(int frames, double speed, double radius, int landmarks,
                   const sim::NoiseSpec& noise = {}, std::uint64_t seed = 1,
                   double min_depth = 2.0, double max_depth = 30.0);

/// Sliding window over frames [first, last] of a scene at ground truth: every
/// track seen at least twice in the window becomes a landmark anchored at its
/// first usable observation, with the true depth.
SlidingWindowState window_from_scene(const Scene& scene, int first, int last);

struct LoopScenario {
  Scene scene;
  /// Keyframe i is frame i * stride; points are exact.
  std::vector<KeyframeBundle> keyframes;
  Vocabulary vocabulary;
  /// Frontend-admitted tracks the keyframes are built from.
  FeatureTrackTable admitted;
  int stride = 5;
};

/// Circle driven for `laps` laps (radius 10 m, 2 m/s), or a straight line of
/// the same length when `revisit` is false; bags are filled in.
LoopScenario loop_scenario(double laps, bool revisit, const sim::NoiseSpec& noise,
                           std::uint64_t seed = 1, int stride = 5, double max_depth = 30.0);

}  // namespace mcvo::testing
