#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcvo/eval/io.hpp"
#include "mcvo/eval/metrics.hpp"
#include "mcvo/eval/pipeline.hpp"
#include "mcvo/loop/vocabulary.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInit = 3;
constexpr int kExitDegenerate = 4;

struct SimFlags {
  std::string trajectory = "circle";
  int frames = 500;
  double rate = 10.0;
  double speed = 2.0;
  double radius = 0.0;
  double laps = 1.0;
  double noise = 0.5;
  double dropout = 0.02;
  double flip = 0.05;
  int landmarks = 3000;
  double min_depth = 2.0;
  double max_depth = 30.0;

  void add(CLI::App* app) {
    app->add_option("--trajectory", trajectory, "circle, lemniscate, straight or smooth_random")
        ->capture_default_str();
    app->add_option("--frames", frames, "Number of frames")->capture_default_str();
    app->add_option("--rate", rate, "Frame rate (Hz)")->capture_default_str();
    app->add_option("--speed", speed, "Speed (m/s)")->capture_default_str();
    app->add_option("--radius", radius, "Circle radius, 0 to derive from --laps")
        ->capture_default_str();
    app->add_option("--laps", laps, "Circle laps when the radius is derived")->capture_default_str();
    app->add_option("--noise", noise, "Pixel noise sigma")->capture_default_str();
    app->add_option("--dropout", dropout, "Observation dropout probability")->capture_default_str();
    app->add_option("--flip", flip, "Descriptor bit flip rate")->capture_default_str();
    app->add_option("--landmarks", landmarks, "Landmark count")->capture_default_str();
    app->add_option("--min-depth", min_depth, "Landmark distance band start (m)")
        ->capture_default_str();
    app->add_option("--max-depth", max_depth, "Landmark distance band end (m)")
        ->capture_default_str();
  }

  mcvo::SimulationConfig config() const {
    mcvo::SimulationConfig c;
    c.trajectory.kind = mcvo::sim::trajectory_kind_from_string(trajectory);
    c.trajectory.duration_frames = frames;
    c.trajectory.frame_rate = rate;
    c.trajectory.speed = speed;
    c.trajectory.radius = radius;
    c.trajectory.laps = laps;
    c.noise.pixel_sigma = noise;
    c.noise.dropout_prob = dropout;
    c.noise.descriptor_flip_rate = flip;
    c.landmarks = landmarks;
    c.min_depth = min_depth;
    c.max_depth = max_depth;
    return c;
  }
};

int report_failure(const mcvo::RunResult& result) {
  const auto& o = result.odometry;
  std::cerr << "run failed: " << o.failure << "\n" << o.init_report;
  return o.status == mcvo::RunStatus::kDegenerate ? kExitDegenerate : kExitInit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera visual odometry: simulation, runs and evaluation"};
  app.require_subcommand(1);

  std::string rig_path, tracks_path, out, vocab_path, est_path, gt_path;
  std::uint64_t seed = 0;
  SimFlags sim;

  auto* simulate = app.add_subcommand("simulate", "Render a simulated tracks file");
  simulate->add_option("--rig", rig_path, "Rig file (default: built-in four-camera rig)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_option("--seed", seed, "Seed")->capture_default_str();
  sim.add(simulate);

  std::string loop = "off", scale = "on";
  std::vector<int> cameras;
  std::vector<double> depth_bias;
  auto* run = app.add_subcommand("run", "Run odometry on a tracks file or a fresh simulation");
  run->add_option("--rig", rig_path, "Rig file")->check(CLI::ExistingFile);
  run->add_option("--tracks", tracks_path, "Tracks file (simulates when omitted)")
      ->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seed", seed, "Seed")->capture_default_str();
  run->add_option("--loop", loop, "Loop closure")->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  run->add_option("--scale-correction", scale, "Scale correction")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  run->add_option("--cameras", cameras, "Camera subset, e.g. 0,2")->delimiter(',');
  run->add_option("--vocab", vocab_path, "Vocabulary file")->check(CLI::ExistingFile);
  run->add_option("--depth-bias", depth_bias, "Per-camera depth factor, e.g. 1,1,1.1,1")
      ->delimiter(',');
  sim.add(run);

  double divisor = 0.0;
  auto* eval = app.add_subcommand("eval", "Compare a trajectory with ground truth");
  eval->add_option("--est", est_path, "Estimated trajectory")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path, "Ground-truth trajectory")->required()->check(CLI::ExistingFile);
  eval->add_option("--segment-divisor", divisor,
                   "Divide the 10/50/100/200 m segments (0: 10 below 200 m of path, else 1)");

  int k = 10, depth = 3;
  auto* vocab = app.add_subcommand("make-vocab", "Train a vocabulary on a tracks file");
  vocab->add_option("--tracks", tracks_path, "Tracks file")->required()->check(CLI::ExistingFile);
  vocab->add_option("--out", out, "Vocabulary file")->required();
  vocab->add_option("--k", k, "Branching factor")->capture_default_str();
  vocab->add_option("--depth", depth, "Tree depth")->capture_default_str();
  vocab->add_option("--seed", seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (*simulate) {
      const auto rig = rig_path.empty() ? mcvo::sim::default_rig() : mcvo::load_rig_config(rig_path);
      const auto file = mcvo::simulate_tracks(rig, sim.config(), seed);
      std::filesystem::create_directories(out);
      mcvo::write_tracks(file, (std::filesystem::path(out) / "tracks.txt").string());
      mcvo::write_rig_config(rig, (std::filesystem::path(out) / "rig.txt").string());
      std::printf("wrote %zu observations over %d frames to %s\n", file.tracks.observation_count(),
                  file.tracks.last_frame() + 1, out.c_str());
      return 0;
    }
    if (*run) {
      mcvo::RunConfig config;
      config.rig_path = rig_path;
      config.tracks_path = tracks_path;
      if (tracks_path.empty()) config.simulate = sim.config();
      config.cameras = cameras;
      config.loop_closure = loop == "on";
      config.scale_correction = scale == "on";
      config.output_dir = out;
      config.seed = seed;
      config.vocabulary_path = vocab_path;
      config.depth_bias = depth_bias;
      const auto result = mcvo::run_pipeline(config);
      if (result.odometry.status != mcvo::RunStatus::kOk) return report_failure(result);
      std::cout << mcvo::format_run_report(result);
      return 0;
    }
    if (*eval) {
      const auto est = mcvo::load_trajectory(est_path);
      const auto gt = mcvo::load_trajectory(gt_path);
      if (divisor <= 0.0) divisor = mcvo::path_length(gt) < 200.0 ? 10.0 : 1.0;
      std::cout << mcvo::format_metric_report(
          mcvo::evaluate(est, gt, mcvo::default_segment_lengths(divisor)));
      return 0;
    }
    if (*vocab) {
      const auto file = mcvo::load_tracks(tracks_path);
      std::vector<mcvo::Descriptor> training;
      for (int c = 0; c < file.tracks.num_cameras(); ++c) {
        for (const auto& [id, track] : file.tracks.tracks(c)) {
          for (const auto& p : track) {
            if (p.descriptor) {
              training.push_back(*p.descriptor);
              break;
            }
          }
        }
      }
      const auto v = mcvo::build_vocabulary(training, k, depth, seed);
      mcvo::save_vocabulary(v, out);
      std::printf("vocabulary with %d words from %zu descriptors\n", v.size(), training.size());
      return 0;
    }
  } catch (const mcvo::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
