#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcvo/backend/landmarks.hpp"
#include "mcvo/backend/marginalization.hpp"
#include "mcvo/backend/optimizer.hpp"
#include "mcvo/backend/scale_correction.hpp"
#include "mcvo/eval/io.hpp"
#include "mcvo/eval/metrics.hpp"
#include "mcvo/frontend/feature_selection.hpp"
#include "mcvo/init/initializer.hpp"
#include "mcvo/loop/keyframe_database.hpp"
#include "mcvo/loop/pose_graph.hpp"
#include "mcvo/loop/verification.hpp"
#include "mcvo/loop/vocabulary.hpp"
#include "mcvo/sim/simulator.hpp"

namespace mcvo {

struct PipelineOptions {
  SelectionOptions frontend;
  InitOptions init;
  int window_capacity = 11;
  int motion_only_iterations = 5;
  OptimizeOptions optimize;
  KeyframePolicy keyframe;
  MarginalizationOptions marginalization;
  bool scale_correction = true;
  ScaleCorrectionOptions scale;
  /// Per-camera factor applied to every newly triangulated depth (ablation).
  std::vector<double> depth_bias;

  bool loop_closure = false;
  /// Trained on one descriptor per admitted track when absent.
  std::optional<Vocabulary> vocabulary;
  int vocabulary_k = 10;
  int vocabulary_depth = 3;
  LoopQueryOptions loop_query;
  LoopVerifyOptions loop_verify;
  PoseGraphOptions pose_graph;
  /// Keyframes after an accepted loop that are not queried.
  int loop_cooldown_keyframes = 10;
  double odometry_rotation_sigma = 1e-3;
  double odometry_translation_sigma = 1e-2;
  double loop_rotation_sigma = 1e-3;
  double loop_translation_sigma = 1e-2;

  std::uint64_t seed = 0;
};

enum class RunStatus { kOk, kInitFailed, kDegenerate };

std::string to_string(RunStatus status);

struct OdometryResult {
  RunStatus status = RunStatus::kOk;
  std::string failure;
  /// One pose per frame from initialization on.
  TrajectoryRecord trajectory;
  int init_frame = -1;
  std::string init_report;
  int keyframes = 0;
  int marginalized = 0;
  int discarded = 0;
  int scale_corrections = 0;
  std::vector<LoopCandidate> loops;
  std::vector<std::string> diagnostics;
  std::map<std::string, double> timing;
};

/// Frontend admission, initialization, sliding-window optimization with
/// scale correction and, when enabled, loop closure, over every frame of
/// `raw_tracks`. Deterministic for fixed inputs.
OdometryResult run_odometry(const RigConfig& rig, const FeatureTrackTable& raw_tracks,
                            double frame_rate, const PipelineOptions& options = {});

struct SimulationConfig {
  sim::TrajectorySpec trajectory;
  sim::NoiseSpec noise;
  int landmarks = 3000;
  double min_depth = 2.0;
  double max_depth = 30.0;
};

/// Renders a simulation; trajectory, landmark and noise seeds derive from
/// `seed`.
TrackFile simulate_tracks(const RigConfig& rig, const SimulationConfig& config, std::uint64_t seed);

/// Keeps the listed cameras (in order) and renumbers them.
TrackFile select_cameras(const TrackFile& file, const std::vector<int>& cameras);

struct RunConfig {
  /// Empty in simulate mode selects the built-in four-camera rig.
  std::string rig_path;
  std::optional<SimulationConfig> simulate;
  std::string tracks_path;
  std::vector<int> cameras;
  bool loop_closure = false;
  bool scale_correction = true;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::string vocabulary_path;
  std::vector<double> depth_bias;

  /// Throws std::invalid_argument unless exactly one input mode is set and
  /// the referenced files exist.
  void validate() const;
};

struct RunResult {
  OdometryResult odometry;
  RigConfig rig;
  std::optional<TrajectoryRecord> ground_truth;
  std::optional<MetricReport> metrics;
};

/// Runs the configured input through run_odometry. When output_dir is set,
/// writes trajectory.txt, groundtruth.txt (when known), report.txt and
/// timing.txt there; only timing.txt varies between identical runs.
RunResult run_pipeline(const RunConfig& config);

/// Ground-truth record of a track file, timestamps frame / rate.
TrajectoryRecord ground_truth_record(const TrackFile& file);

std::string format_run_report(const RunResult& result);

}  // namespace mcvo
