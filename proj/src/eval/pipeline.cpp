#include "mcvo/eval/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "mcvo/frontend/admission.hpp"

namespace mcvo {

namespace {

class StageTimer {
 public:
  StageTimer(std::map<std::string, double>& sink, const std::string& stage)
      : sink_(sink), stage_(stage), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    sink_[stage_] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::map<std::string, double>& sink_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

/// Mean pixel displacement between two frames over tracks seen in both, and
/// the fraction of the newer frame's observations that belong to landmarks.
std::pair<double, double> frame_motion(const SlidingWindowState& state,
                                       const FeatureTrackTable& tracks, int older, int newer) {
  double sum = 0.0;
  int n = 0, total = 0, tracked = 0;
  for (int c = 0; c < tracks.num_cameras(); ++c) {
    const auto a = tracks.observations_at(c, older);
    const auto b = tracks.observations_at(c, newer);
    std::size_t i = 0;
    for (const auto& [id, p] : b) {
      ++total;
      if (state.landmarks.count(make_landmark_id(c, id))) ++tracked;
      while (i < a.size() && a[i].first < id) ++i;
      if (i < a.size() && a[i].first == id) {
        sum += (p.pixel - a[i].second.pixel).norm();
        ++n;
      }
    }
  }
  return {n > 0 ? sum / n : 0.0, total > 0 ? static_cast<double>(tracked) / total : 0.0};
}

Eigen::Matrix<double, 6, 6> information(double rotation_sigma, double translation_sigma) {
  Eigen::Matrix<double, 6, 6> info = Eigen::Matrix<double, 6, 6>::Zero();
  info.diagonal().head<3>().setConstant(1.0 / (rotation_sigma * rotation_sigma));
  info.diagonal().tail<3>().setConstant(1.0 / (translation_sigma * translation_sigma));
  return info;
}

/// Left-multiplies every window pose and the prior linearization by `delta`.
void reanchor_window(SlidingWindowState& state, const Pose& delta) {
  for (auto& f : state.frames) f.pose = delta * f.pose;
  auto& prior = state.prior;
  if (prior.empty()) return;
  for (auto& p : prior.linearization) p = delta * p;
  // dx translation becomes R_delta (t - t_lin); rotation increments are unchanged.
  const Eigen::Matrix3d Rt = delta.rotation.toRotationMatrix().transpose();
  for (std::size_t k = 0; k < prior.frames.size(); ++k) {
    prior.J.middleCols<3>(6 * k + 3) = prior.J.middleCols<3>(6 * k + 3) * Rt;
  }
  prior.information = prior.J.transpose() * prior.J;
  prior.information_vector = prior.J.transpose() * prior.r0;
}

struct FrameOutput {
  Pose raw;
  int keyframe = -1;
  Pose relative;
};

class LoopCloser {
 public:
  LoopCloser(const RigConfig& rig, const PipelineOptions& options, Vocabulary vocabulary)
      : rig_(rig), options_(options), vocabulary_(std::move(vocabulary)) {
    for (const auto& c : rig.cameras) extrinsics_.push_back(c.extrinsic);
  }

  int size() const { return static_cast<int>(graph_.vertices.size()); }
  const Pose& vertex(int k) const { return graph_.vertices[k]; }

  /// Adds the frame as a keyframe; returns the world correction to apply to
  /// the window when a loop was closed.
  std::optional<Pose> add(const SlidingWindowState& state, const FeatureTrackTable& tracks,
                          int frame, double timestamp, OdometryResult& result) {
    const FrameState* fs = state.find_frame(frame);
    const WorldPointLookup lookup = [&](int camera, int track) -> std::optional<Eigen::Vector3d> {
      const auto it = state.landmarks.find(make_landmark_id(camera, track));
      if (it == state.landmarks.end()) return std::nullopt;
      return landmark_world_point(state, it->second);
    };
    const int id = size();
    KeyframeBundle kf = make_keyframe(id, frame, timestamp, fs->pose, rig_, tracks, lookup);
    kf.bow = bundle_bow(kf, vocabulary_);

    graph_.vertices.push_back(fs->pose);
    if (id > 0) {
      const Pose z = inverse(odometry_.back()) * fs->pose;
      graph_.edges.push_back({id - 1, id, z,
                              information(options_.odometry_rotation_sigma,
                                          options_.odometry_translation_sigma),
                              false});
    }
    odometry_.push_back(fs->pose);

    std::optional<Pose> correction;
    if (!db_.empty() && id >= next_query_) {
      for (auto candidate : db_.query(kf, options_.loop_query)) {
        LoopVerifyOptions verify = options_.loop_verify;
        verify.seed = derive_seed_(id);
        const KeyframeBundle* match = db_.find(candidate.match);
        candidate = verify_loop(candidate, kf, *match, extrinsics_, verify);
        if (!candidate.verified) continue;
        graph_.edges.push_back({candidate.match, id, *candidate.relative_pose,
                                information(options_.loop_rotation_sigma,
                                            options_.loop_translation_sigma),
                                true});
        result.loops.push_back(candidate);
        const Pose before = graph_.vertices[id];
        optimize_pose_graph(graph_, options_.pose_graph);
        correction = graph_.vertices[id] * inverse(before);
        odometry_.back() = graph_.vertices[id];
        next_query_ = id + 1 + options_.loop_cooldown_keyframes;
        break;
      }
    }
    db_.add(std::move(kf), vocabulary_);
    return correction;
  }

 private:
  std::uint64_t derive_seed_(int id) const {
    return sim::derive_seed(options_.seed, static_cast<std::uint64_t>(id));
  }

  const RigConfig& rig_;
  const PipelineOptions& options_;
  Vocabulary vocabulary_;
  std::vector<CameraExtrinsic> extrinsics_;
  KeyframeDatabase db_;
  PoseGraph graph_;
  /// Keyframe poses in the window's current world frame.
  std::vector<Pose> odometry_;
  int next_query_ = 0;
};

Vocabulary train_vocabulary(const FeatureTrackTable& tracks, const PipelineOptions& options) {
  std::vector<Descriptor> training;
  for (int c = 0; c < tracks.num_cameras(); ++c) {
    for (const auto& [id, track] : tracks.tracks(c)) {
      for (const auto& p : track) {
        if (p.descriptor) {
          training.push_back(*p.descriptor);
          break;
        }
      }
    }
  }
  if (training.empty()) throw std::invalid_argument("no descriptors to train a vocabulary");
  return build_vocabulary(training, options.vocabulary_k, options.vocabulary_depth, options.seed);
}

}  // namespace

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kOk:
      return "ok";
    case RunStatus::kInitFailed:
      return "initialization_failed";
    case RunStatus::kDegenerate:
      return "degenerate_motion";
  }
  return "unknown";
}

OdometryResult run_odometry(const RigConfig& rig, const FeatureTrackTable& raw_tracks,
                            double frame_rate, const PipelineOptions& options) {
  OdometryResult result;
  auto& timing = result.timing;
  FeatureTrackTable tracks;
  {
    StageTimer t(timing, "frontend");
    tracks = admit_tracks(raw_tracks, rig, options.frontend);
  }
  const int last_frame = tracks.last_frame();
  std::vector<double> timestamps(std::max(last_frame + 1, 0));
  for (int f = 0; f <= last_frame; ++f) timestamps[f] = f / frame_rate;

  InitOptions init_options = options.init;
  init_options.landmarks.depth_bias = options.depth_bias;
  InitResult init;
  {
    StageTimer t(timing, "initialization");
    for (int f = std::max(tracks.first_frame(), 0) + init_options.window_frames - 1;
         f <= last_frame; ++f) {
      init = try_initialize(rig, tracks, f, timestamps, init_options);
      if (init.success) break;
    }
  }
  result.init_report = format_init_report(init);
  if (!init.success) {
    const bool degenerate = init.failure.rfind("scale unobservable", 0) == 0;
    result.status = degenerate ? RunStatus::kDegenerate : RunStatus::kInitFailed;
    result.failure = init.failure.empty() ? "sequence too short" : init.failure;
    return result;
  }
  result.init_frame = init.last_frame;

  SlidingWindowState state = std::move(init.state);
  state.capacity = options.window_capacity;
  LandmarkInitOptions landmark_options = init_options.landmarks;

  std::optional<LoopCloser> loop;
  if (options.loop_closure) {
    StageTimer t(timing, "vocabulary");
    loop.emplace(rig, options,
                 options.vocabulary ? *options.vocabulary : train_vocabulary(tracks, options));
  }

  std::map<int, FrameOutput> outputs;
  bool corrected = false;
  auto emit = [&](const FrameState& fs, bool is_keyframe) {
    FrameOutput out;
    out.raw = fs.pose;
    if (loop && loop->size() > 0) {
      out.keyframe = loop->size() - 1;
      if (!is_keyframe) out.relative = inverse(loop->vertex(out.keyframe)) * fs.pose;
    }
    outputs[fs.frame] = out;
  };

  OptimizeOptions motion = options.optimize;
  motion.fix_landmarks = true;
  motion.max_iterations = options.motion_only_iterations;

  for (int f = init.last_frame + 1; f <= last_frame; ++f) {
    {
      StageTimer t(timing, "tracking");
      const Pose& p1 = state.frames.back().pose;
      const Pose& p0 = state.frames[state.frames.size() - 2].pose;
      const Pose predicted = p1 * (inverse(p0) * p1);
      state.frames.push_back({f, timestamps[f], predicted});
      add_frame_observations(state, rig, tracks, f);
      motion.fixed_frames.clear();
      for (std::size_t s = 0; s + 1 < state.frames.size(); ++s) {
        motion.fixed_frames.insert(state.frames[s].frame);
      }
      optimize_window(state, motion);
    }
    {
      StageTimer t(timing, "backend");
      triangulate_new_landmarks(state, rig, tracks, landmark_options);
      optimize_window(state, options.optimize);
      remove_outliers(state);
    }
    if (static_cast<int>(state.frames.size()) <= state.capacity) continue;

    const int n = static_cast<int>(state.frames.size());
    const auto [parallax, tracked_ratio] =
        frame_motion(state, tracks, state.frames[n - 2].frame, state.frames[n - 1].frame);
    const KeyframeDecision decision = keyframe_decision(parallax, tracked_ratio, options.keyframe);
    if (decision == KeyframeDecision::kDiscardSecondNewest) {
      StageTimer t(timing, "marginalization");
      emit(state.frames[n - 2], false);
      discard_second_newest(state, options.marginalization);
      ++result.discarded;
      continue;
    }
    if (options.scale_correction) {
      StageTimer t(timing, "scale_correction");
      const auto report = correct_scale(state, options.scale);
      if (report.applied) {
        ++result.scale_corrections;
        optimize_window(state, options.optimize);
      }
    }
    const FrameState oldest = state.frames.front();
    std::optional<Pose> correction;
    if (loop) {
      StageTimer t(timing, "loop_closure");
      correction = loop->add(state, tracks, oldest.frame, oldest.timestamp, result);
      ++result.keyframes;
    }
    emit(oldest, loop.has_value());
    {
      StageTimer t(timing, "marginalization");
      marginalize_oldest(state, options.marginalization);
      ++result.marginalized;
    }
    if (correction) {
      reanchor_window(state, *correction);
      corrected = true;
    }
  }
  for (const auto& fs : state.frames) emit(fs, false);

  for (const auto& [frame, out] : outputs) {
    result.trajectory.timestamps.push_back(timestamps[frame]);
    result.trajectory.poses.push_back(corrected && out.keyframe >= 0
                                          ? loop->vertex(out.keyframe) * out.relative
                                          : out.raw);
  }
  result.diagnostics = state.diagnostics;
  return result;
}

TrackFile simulate_tracks(const RigConfig& rig, const SimulationConfig& config,
                          std::uint64_t seed) {
  sim::TrajectorySpec spec = config.trajectory;
  spec.seed = sim::derive_seed(seed, 0);
  sim::NoiseSpec noise = config.noise;
  noise.seed = sim::derive_seed(seed, 1);
  const auto trajectory = sim::generate_trajectory(spec);
  const auto cloud = sim::sample_landmarks(config.landmarks, trajectory, config.min_depth,
                                           config.max_depth, sim::derive_seed(seed, 2));
  auto out = sim::render_observations(rig, trajectory, cloud, noise, Parallelism::kOpenMP,
                                      spec.frame_rate);
  TrackFile file;
  file.tracks = std::move(out.tracks);
  file.frame_rate = spec.frame_rate;
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    file.ground_truth[static_cast<int>(f)] = trajectory[f];
  }
  file.diagnostics = std::move(out.diagnostics);
  return file;
}

TrackFile select_cameras(const TrackFile& file, const std::vector<int>& cameras) {
  TrackFile out;
  out.frame_rate = file.frame_rate;
  out.ground_truth = file.ground_truth;
  out.diagnostics = file.diagnostics;
  out.tracks = FeatureTrackTable(static_cast<int>(cameras.size()));
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const int c = cameras[k];
    if (c < 0 || c >= file.tracks.num_cameras()) {
      throw std::out_of_range("camera index " + std::to_string(c) + " not in tracks");
    }
    for (const auto& [id, track] : file.tracks.tracks(c)) {
      for (const auto& p : track) out.tracks.append(static_cast<int>(k), id, p);
    }
  }
  if (file.tracks.last_frame() >= 0) out.tracks.set_last_frame(file.tracks.last_frame());
  return out;
}

void RunConfig::validate() const {
  const bool ingest = !tracks_path.empty();
  if (ingest == simulate.has_value()) {
    throw std::invalid_argument("exactly one of simulate or tracks input is required");
  }
  if (ingest && !std::filesystem::exists(tracks_path)) {
    throw std::invalid_argument("tracks file not found: " + tracks_path);
  }
  if (!rig_path.empty() && !std::filesystem::exists(rig_path)) {
    throw std::invalid_argument("rig file not found: " + rig_path);
  }
  if (ingest && rig_path.empty()) throw std::invalid_argument("ingest mode needs a rig file");
  if (!vocabulary_path.empty() && !std::filesystem::exists(vocabulary_path)) {
    throw std::invalid_argument("vocabulary file not found: " + vocabulary_path);
  }
}

TrajectoryRecord ground_truth_record(const TrackFile& file) {
  TrajectoryRecord gt;
  for (const auto& [frame, pose] : file.ground_truth) {
    gt.timestamps.push_back(frame / file.frame_rate);
    gt.poses.push_back(pose);
  }
  return gt;
}

RunResult run_pipeline(const RunConfig& config) {
  config.validate();
  RunResult result;
  result.rig = config.rig_path.empty() ? sim::default_rig() : load_rig_config(config.rig_path);
  TrackFile input = config.simulate ? simulate_tracks(result.rig, *config.simulate, config.seed)
                                    : load_tracks(config.tracks_path);
  if (input.tracks.num_cameras() > result.rig.size()) {
    throw std::invalid_argument("tracks reference more cameras than the rig has");
  }
  input.tracks.resize(result.rig.size());
  if (!config.cameras.empty()) {
    result.rig = result.rig.subset(config.cameras);
    input = select_cameras(input, config.cameras);
  }

  PipelineOptions options;
  options.loop_closure = config.loop_closure;
  options.scale_correction = config.scale_correction;
  options.depth_bias = config.depth_bias;
  options.seed = config.seed;
  if (!config.vocabulary_path.empty()) options.vocabulary = load_vocabulary(config.vocabulary_path);
  result.odometry = run_odometry(result.rig, input.tracks, input.frame_rate, options);

  if (!input.ground_truth.empty()) result.ground_truth = ground_truth_record(input);
  if (result.ground_truth && result.odometry.trajectory.size() >= 3) {
    StageTimer t(result.odometry.timing, "evaluation");
    const double length = path_length(*result.ground_truth);
    try {
      result.metrics = evaluate(result.odometry.trajectory, *result.ground_truth,
                                default_segment_lengths(length < 200.0 ? 10.0 : 1.0));
    } catch (const std::invalid_argument& e) {
      result.odometry.diagnostics.push_back(std::string("evaluation skipped: ") + e.what());
    }
  }
  if (result.metrics) result.metrics->timing = result.odometry.timing;

  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path dir(config.output_dir);
    write_trajectory(result.odometry.trajectory, (dir / "trajectory.txt").string());
    if (result.ground_truth) write_trajectory(*result.ground_truth, (dir / "groundtruth.txt").string());
    write_text_file((dir / "report.txt").string(), format_run_report(result));
    std::string timing;
    for (const auto& [stage, seconds] : result.odometry.timing) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s %.6f\n", stage.c_str(), seconds);
      timing += buf;
    }
    write_text_file((dir / "timing.txt").string(), timing);
  }
  return result;
}

std::string format_run_report(const RunResult& result) {
  const auto& o = result.odometry;
  std::string out = "status " + to_string(o.status) + "\n";
  if (!o.failure.empty()) out += "failure " + o.failure + "\n";
  out += "cameras " + std::to_string(result.rig.size()) + "\n";
  out += "init_frame " + std::to_string(o.init_frame) + "\n";
  out += "poses " + std::to_string(o.trajectory.size()) + "\n";
  out += "marginalized " + std::to_string(o.marginalized) + "\n";
  out += "discarded " + std::to_string(o.discarded) + "\n";
  out += "scale_corrections " + std::to_string(o.scale_corrections) + "\n";
  out += "keyframes " + std::to_string(o.keyframes) + "\n";
  out += "loops " + std::to_string(o.loops.size()) + "\n";
  for (const auto& l : o.loops) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "loop %d %d score %.6f inliers %d\n", l.query, l.match, l.score,
                  l.inliers);
    out += buf;
  }
  if (result.metrics) out += format_metric_report(*result.metrics);
  out += o.init_report;
  if (!o.init_report.empty() && o.init_report.back() != '\n') out += "\n";
  return out;
}

}  // namespace mcvo
