#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mcvo/eval/io.hpp"
#include "mcvo/eval/metrics.hpp"
#include "mcvo/eval/pipeline.hpp"
#include "support/fixtures.hpp"

namespace mcvo {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcvo_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrajectoryRecord circle_record(int n, double radius = 10.0) {
  TrajectoryRecord r;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    r.timestamps.push_back(0.1 * i);
    r.poses.emplace_back(Eigen::Quaterniond(Eigen::AngleAxisd(a + M_PI_2, Eigen::Vector3d::UnitZ())),
                         Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a),
                                         0.3 * std::sin(3 * a)));
  }
  return r;
}

TrajectoryRecord transformed(const TrajectoryRecord& r, const Pose& T, double scale = 1.0) {
  TrajectoryRecord out = r;
  for (auto& p : out.poses) {
    p.translation = T.rotation * (scale * p.translation) + T.translation;
    p.rotation = T.rotation * p.rotation;
  }
  return out;
}

TEST(RigIo, ParsesTwoCameraRig) {
  std::istringstream in(
      "# two cameras\n"
      "cam 0 pinhole 300 300 320 240 1.2 640 480 | 0 0 0 0 0 0 1\n"
      "\n"
      "cam 1 equidistant 200 200 320 320 1.5707963267948966 640 640 | 0.5 0 0 0 0 0 1\n");
  const RigConfig rig = parse_rig_config(in);
  ASSERT_EQ(rig.size(), 2);
  EXPECT_EQ(rig.cameras[1].intrinsic.model, CameraModel::kEquidistant);
  EXPECT_EQ(rig.cameras[1].extrinsic.cam_in_body.translation.x(), 0.5);
}

TEST(RigIo, NonUnitQuaternionIsRejected) {
  std::istringstream in(
      "cam 0 pinhole 300 300 320 240 1.2 640 480 | 0 0 0 0 0 0 0.9\n"
      "cam 1 pinhole 300 300 320 240 1.2 640 480 | 0 0 0 0 0 0 1\n");
  EXPECT_THROW(parse_rig_config(in), std::invalid_argument);
}

TEST(RigIo, MalformedLineReportsLineNumber) {
  std::istringstream in(
      "cam 0 pinhole 300 300 320 240 1.2 640 480 | 0 0 0 0 0 0 1\n"
      "cam 1 pinhole 300 300 320 240 1.2 640 480 0 0 0 0 0 0 1\n");
  try {
    parse_rig_config(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(RigIo, RoundTripIsBitwise) {
  RigConfig rig = sim::default_rig();
  std::mt19937_64 rng(3);
  for (auto& cam : rig.cameras) cam.extrinsic.cam_in_body = testing::random_pose(rng, 1.0);
  std::istringstream in(format_rig_config(rig));
  const RigConfig back = parse_rig_config(in);
  ASSERT_EQ(back.size(), rig.size());
  for (int c = 0; c < rig.size(); ++c) {
    const auto& a = rig.cameras[c];
    const auto& b = back.cameras[c];
    EXPECT_EQ(a.intrinsic.model, b.intrinsic.model);
    EXPECT_EQ(a.intrinsic.fx, b.intrinsic.fx);
    EXPECT_EQ(a.intrinsic.fy, b.intrinsic.fy);
    EXPECT_EQ(a.intrinsic.cx, b.intrinsic.cx);
    EXPECT_EQ(a.intrinsic.cy, b.intrinsic.cy);
    EXPECT_EQ(a.intrinsic.fov_limit, b.intrinsic.fov_limit);
    EXPECT_EQ(a.intrinsic.width, b.intrinsic.width);
    EXPECT_EQ(a.intrinsic.height, b.intrinsic.height);
    EXPECT_TRUE(a.extrinsic.cam_in_body.translation == b.extrinsic.cam_in_body.translation);
    EXPECT_TRUE(a.extrinsic.cam_in_body.rotation.coeffs() == b.extrinsic.cam_in_body.rotation.coeffs());
  }
}

TEST(TracksIo, EmptyFileIsEmptyTable) {
  std::istringstream in("");
  const TrackFile f = parse_tracks(in);
  EXPECT_TRUE(f.tracks.empty());
  EXPECT_TRUE(f.ground_truth.empty());
}

TEST(TracksIo, SimulatorOutputRoundTrips) {
  SimulationConfig cfg;
  cfg.trajectory.duration_frames = 30;
  cfg.trajectory.speed = 3.0;
  cfg.noise = {0.5, 0.05, 0.05, 0};
  cfg.landmarks = 500;
  const TrackFile f = simulate_tracks(sim::default_rig(), cfg, 4);
  std::istringstream in(format_tracks(f));
  const TrackFile back = parse_tracks(in);
  EXPECT_TRUE(back.tracks == f.tracks);
  EXPECT_EQ(back.frame_rate, f.frame_rate);
  ASSERT_EQ(back.ground_truth.size(), f.ground_truth.size());
  for (const auto& [frame, pose] : f.ground_truth) {
    EXPECT_TRUE(back.ground_truth.at(frame).translation == pose.translation);
    EXPECT_TRUE(back.ground_truth.at(frame).rotation.coeffs() == pose.rotation.coeffs());
  }
  EXPECT_TRUE(back.diagnostics.empty());
}

TEST(TracksIo, DuplicateRowKeepsFirst) {
  std::istringstream in(
      "MCVOTRK1\n"
      "obs 0 0 7 10 20\n"
      "obs 0 0 7 11 21\n"
      "obs 1 0 7 12 22\n");
  const TrackFile f = parse_tracks(in);
  ASSERT_EQ(f.diagnostics.size(), 1u);
  const Track* t = f.tracks.find(0, 7);
  ASSERT_NE(t, nullptr);
  ASSERT_EQ(t->size(), 2u);
  EXPECT_EQ(t->front().pixel, Eigen::Vector2d(10, 20));
}

TEST(TracksIo, NonMonotonicFramesRejected) {
  std::istringstream in(
      "MCVOTRK1\n"
      "obs 3 0 7 10 20\n"
      "obs 2 0 7 11 21\n");
  try {
    parse_tracks(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(TrajectoryIo, IdentityLine) {
  TrajectoryRecord r;
  r.timestamps = {0.0};
  r.poses = {Pose()};
  EXPECT_EQ(format_trajectory(r), "0.00000000 0 0 0 0 0 0 1\n");
}

TEST(TrajectoryIo, EmptyRecordIsEmptyFile) {
  const auto dir = temp_dir("empty");
  write_trajectory({}, (dir / "t.txt").string());
  EXPECT_EQ(fs::file_size(dir / "t.txt"), 0u);
  EXPECT_TRUE(load_trajectory((dir / "t.txt").string()).empty());
}

TEST(TrajectoryIo, RoundTripWithinPrecision) {
  std::mt19937_64 rng(5);
  TrajectoryRecord r;
  for (int i = 0; i < 200; ++i) {
    r.timestamps.push_back(1000.0 + 0.1 * i + 1e-9 * i);
    r.poses.push_back(testing::random_pose(rng, 50.0));
  }
  std::istringstream in(format_trajectory(r));
  const TrajectoryRecord back = parse_trajectory(in);
  ASSERT_EQ(back.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_NEAR(back.timestamps[i], r.timestamps[i], 1e-8);
    EXPECT_LT((back.poses[i].translation - r.poses[i].translation).norm(), 1e-6);
    EXPECT_LT(testing::rotation_distance(back.poses[i], r.poses[i]), 1e-8);
  }
}

TEST(TrajectoryIo, NonIncreasingTimestampsRejected) {
  TrajectoryRecord r;
  r.timestamps = {0.0, 0.0};
  r.poses = {Pose(), Pose()};
  EXPECT_THROW(format_trajectory(r), std::invalid_argument);
  std::istringstream in("1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
  EXPECT_THROW(parse_trajectory(in), ParseError);
}

TEST(Metrics, AssociationTolerance) {
  TrajectoryRecord a, b;
  a.timestamps = {0.0, 1.0, 2.0};
  b.timestamps = {0.009, 1.02, 1.995};
  a.poses.resize(3);
  b.poses.resize(3);
  const auto pairs = associate(a, b);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], std::make_pair(0, 0));
  EXPECT_EQ(pairs[1], std::make_pair(2, 2));
}

TEST(Metrics, AteIdentity) {
  const auto gt = circle_record(100);
  const AteResult r = ate(gt, gt);
  EXPECT_NEAR(r.translation_rmse, 0.0, 1e-12);
  EXPECT_NEAR(r.rotation_rmse_deg, 0.0, 1e-6);
  EXPECT_NEAR(r.scale, 1.0, 1e-12);
}

TEST(Metrics, RigidAlignmentAbsorbsDisplacement) {
  const auto gt = circle_record(100);
  const Pose T(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 6, Eigen::Vector3d::UnitZ())),
               Eigen::Vector3d(5, 0, 0));
  const AteResult r = ate(transformed(gt, T), gt, Alignment::kRigid);
  EXPECT_NEAR(r.translation_rmse, 0.0, 1e-9);
  EXPECT_NEAR(r.rotation_rmse_deg, 0.0, 1e-6);
  EXPECT_NEAR(r.scale, 1.0, 1e-12);
}

TEST(Metrics, SimilarityRecoversScale) {
  const auto gt = circle_record(100);
  const AteResult r = ate(transformed(gt, Pose(), 1.1), gt, Alignment::kSimilarity);
  EXPECT_NEAR(r.translation_rmse, 0.0, 1e-9);
  EXPECT_NEAR(r.scale, 1.0 / 1.1, 1e-9);
  const AteResult g = ate(gt, transformed(gt, Pose(), 1.1), Alignment::kSimilarity);
  EXPECT_NEAR(g.scale, 1.1, 1e-9);
}

TEST(Metrics, AteNeedsThreePairs) {
  const auto gt = circle_record(2);
  EXPECT_THROW(ate(gt, gt), std::invalid_argument);
}

TEST(Metrics, RigidAteInvariantUnderRigidTransform) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.2);
  const auto gt = circle_record(150);
  auto est = gt;
  for (auto& p : est.poses) p.translation += Eigen::Vector3d(n(rng), n(rng), n(rng));
  const double base = ate(est, gt).translation_rmse;
  for (int t = 0; t < 20; ++t) {
    const auto moved = transformed(est, testing::random_pose(rng, 100.0));
    EXPECT_NEAR(ate(moved, gt).translation_rmse, base, 1e-9);
    EXPECT_GE(ate(moved, gt, Alignment::kRigid).translation_rmse + 1e-12,
              ate(moved, gt, Alignment::kSimilarity).translation_rmse);
  }
}

TEST(Metrics, SimilarityScaleOfScaledGroundTruth) {
  std::mt19937_64 rng(10);
  const auto gt = circle_record(80);
  for (double k : {0.3, 0.9, 1.7, 12.0}) {
    const auto scaled = transformed(gt, testing::random_pose(rng, 10.0), k);
    EXPECT_NEAR(ate(gt, scaled, Alignment::kSimilarity).scale, k, 1e-9 * k);
  }
}

TEST(Metrics, RpeZeroForIdenticalTrajectories) {
  const auto gt = circle_record(400, 20.0);
  for (const auto& s : rpe(gt, gt, {1.0, 5.0, 10.0})) {
    EXPECT_FALSE(s.skipped);
    EXPECT_GT(s.count, 0);
    EXPECT_NEAR(s.translation_rmse_pct, 0.0, 1e-9);
    EXPECT_NEAR(s.rotation_rmse_deg_per_m, 0.0, 1e-6);
  }
}

TEST(Metrics, RpeConstantYawDrift) {
  // Straight path along x; the estimate yaws 1 degree every 10 m travelled.
  TrajectoryRecord gt, est;
  const double rate = 0.1 * M_PI / 180.0;
  Pose e;
  for (int i = 0; i <= 1000; ++i) {
    const double x = 0.1 * i;
    gt.timestamps.push_back(0.1 * i);
    gt.poses.emplace_back(Eigen::Quaterniond::Identity(), Eigen::Vector3d(x, 0, 0));
    if (i > 0) {
      const Pose step(Eigen::Quaterniond(Eigen::AngleAxisd(rate * 0.1, Eigen::Vector3d::UnitZ())),
                      Eigen::Vector3d(0.1, 0, 0));
      e = e * step;
    }
    est.timestamps.push_back(0.1 * i);
    est.poses.push_back(e);
  }
  for (const auto& s : rpe(est, gt, {1.0, 5.0, 10.0, 50.0})) {
    ASSERT_FALSE(s.skipped);
    EXPECT_NEAR(s.rotation_mean_deg_per_m, 0.1, 1e-6) << s.length;
    EXPECT_NEAR(s.rotation_rmse_deg_per_m, 0.1, 1e-6) << s.length;
  }
}

TEST(Metrics, RpeSkipsLongSegments) {
  const auto gt = circle_record(100, 1.0);
  const auto out = rpe(gt, gt, {1.0, 100.0});
  EXPECT_FALSE(out[0].skipped);
  EXPECT_TRUE(out[1].skipped);
  EXPECT_FALSE(out[1].note.empty());
}

TEST(Metrics, ScaleDrift) {
  const auto gt = circle_record(100);
  EXPECT_NEAR(scale_drift(gt, gt), 0.0, 1e-9);
  const auto big = transformed(gt, Pose(), 1.05);
  EXPECT_NEAR(scale_drift(gt, big), 5.0, 1e-7);
  TrajectoryRecord line;
  for (int i = 0; i < 10; ++i) {
    line.timestamps.push_back(i);
    line.poses.emplace_back(Eigen::Quaterniond::Identity(), Eigen::Vector3d(i, 0, 0));
  }
  EXPECT_THROW(scale_drift(line, line), std::invalid_argument);
  EXPECT_THROW(scale_drift(circle_record(2), circle_record(2)), std::invalid_argument);
}

TEST(Metrics, ReportValuesFiniteAndNonNegative) {
  const auto gt = circle_record(300, 5.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.05);
  auto est = gt;
  for (auto& p : est.poses) p.translation += Eigen::Vector3d(n(rng), n(rng), n(rng));
  const MetricReport r = evaluate(est, gt, default_segment_lengths(10.0));
  for (double v : {r.ate_rigid.translation_rmse, r.ate_rigid.rotation_rmse_deg,
                   r.ate_similarity.translation_rmse, r.scale_drift_pct, r.path_length}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
  for (const auto& s : r.rpe) {
    if (s.skipped) continue;
    EXPECT_GE(s.translation_mean_pct, 0.0);
    EXPECT_GE(s.rotation_rmse_deg_per_m, 0.0);
  }
}

RunConfig small_run(const std::string& out) {
  RunConfig c;
  SimulationConfig s;
  s.trajectory.duration_frames = 60;
  s.trajectory.speed = 5.0;
  s.trajectory.radius = 16.0;
  s.noise = {0.5, 0.02, 0.05, 0};
  c.simulate = s;
  c.output_dir = out;
  c.seed = 3;
  return c;
}

TEST(Pipeline, NoiselessCircleIsAccurate) {
  RunConfig c = small_run("");
  c.simulate->noise = {0.0, 0.0, 0.0, 0};
  const RunResult r = run_pipeline(c);
  ASSERT_EQ(r.odometry.status, RunStatus::kOk) << r.odometry.failure;
  ASSERT_TRUE(r.metrics);
  EXPECT_LT(r.metrics->ate_rigid.translation_rmse, 1e-3);
}

TEST(Pipeline, DeterministicOutputs) {
  const auto a = temp_dir("det_a"), b = temp_dir("det_b");
  run_pipeline(small_run(a.string()));
  run_pipeline(small_run(b.string()));
  for (const char* name : {"trajectory.txt", "groundtruth.txt", "report.txt"}) {
    const std::string x = read_file(a / name);
    EXPECT_FALSE(x.empty()) << name;
    EXPECT_EQ(x, read_file(b / name)) << name;
  }
}

TEST(Pipeline, IngestMatchesSimulate) {
  const auto sim_dir = temp_dir("sim"), ingest_dir = temp_dir("ingest");
  const RunConfig c = small_run(sim_dir.string());
  run_pipeline(c);
  const TrackFile tracks = simulate_tracks(sim::default_rig(), *c.simulate, c.seed);
  write_tracks(tracks, (ingest_dir / "tracks.txt").string());
  write_rig_config(sim::default_rig(), (ingest_dir / "rig.txt").string());
  RunConfig ingest;
  ingest.rig_path = (ingest_dir / "rig.txt").string();
  ingest.tracks_path = (ingest_dir / "tracks.txt").string();
  ingest.output_dir = (ingest_dir / "out").string();
  ingest.seed = c.seed;
  run_pipeline(ingest);
  EXPECT_EQ(read_file(sim_dir / "trajectory.txt"), read_file(ingest_dir / "out" / "trajectory.txt"));
  EXPECT_EQ(read_file(sim_dir / "report.txt"), read_file(ingest_dir / "out" / "report.txt"));
}

TEST(Pipeline, ConfigNeedsExactlyOneInput) {
  RunConfig c;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_run("");
  c.tracks_path = "/nonexistent/tracks.txt";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.simulate.reset();
  c.rig_path = "/nonexistent/rig.txt";
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Pipeline, TooShortSequenceFailsInitialization) {
  RunConfig c = small_run("");
  c.simulate->trajectory.duration_frames = 20;
  c.simulate->trajectory.speed = 0.1;
  const RunResult r = run_pipeline(c);
  EXPECT_EQ(r.odometry.status, RunStatus::kInitFailed);
  EXPECT_TRUE(r.odometry.trajectory.empty());
}

TEST(Pipeline, StraightLineIsDegenerate) {
  RunConfig c = small_run("");
  c.simulate->trajectory.kind = sim::TrajectoryKind::kStraightLine;
  c.simulate->trajectory.duration_frames = 30;
  const RunResult r = run_pipeline(c);
  EXPECT_EQ(r.odometry.status, RunStatus::kDegenerate) << r.odometry.failure;
}

#ifdef MCVO_CLI_PATH
int run_cli(const std::string& args) {
  const int status = std::system((std::string(MCVO_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  const std::string out = " --out " + (dir / "run").string();
  EXPECT_EQ(run_cli("run --loop maybe" + out), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run --frames 20 --speed 0.1 --radius 16" + out), 3);
  EXPECT_EQ(run_cli("run --frames 30 --speed 5 --trajectory straight" + out), 4);
  EXPECT_EQ(run_cli("simulate --frames 30 --speed 5 --radius 16 --out " + (dir / "sim").string()), 0);
  std::ofstream(dir / "bad_rig.txt") << "cam 0 pinhole 1 2 3\n";
  EXPECT_EQ(run_cli("run --rig " + (dir / "bad_rig.txt").string() + " --tracks " +
                    (dir / "sim" / "tracks.txt").string() + out),
            2);
  EXPECT_EQ(run_cli("run --rig " + (dir / "sim" / "rig.txt").string() + " --tracks " +
                    (dir / "sim" / "tracks.txt").string() + out),
            0);
  EXPECT_EQ(run_cli("eval --est " + (dir / "run" / "trajectory.txt").string() + " --gt " +
                    (dir / "run" / "groundtruth.txt").string()),
            0);
  EXPECT_EQ(run_cli("make-vocab --k 4 --depth 2 --tracks " + (dir / "sim" / "tracks.txt").string() +
                    " --out " + (dir / "vocab.bin").string()),
            0);
  EXPECT_NO_THROW(load_vocabulary((dir / "vocab.bin").string()));
}
#endif

}  // namespace
}  // namespace mcvo
