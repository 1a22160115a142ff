#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mcvo/frontend/descriptor.hpp"
#include "mcvo/frontend/feature_selection.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "support/fixtures.hpp"

namespace mcvo {
namespace {

const ImageRect kBounds{0, 0, 640, 480};

FeatureCandidate cand(double x, double y, double score = 1.0) {
  return FeatureCandidate{Eigen::Vector2d(x, y), score};
}

SelectionOptions opts(int k, double rho = 10.0) {
  SelectionOptions o;
  o.target_count = k;
  o.suppression_radius = rho;
  return o;
}

TEST(Selector, FourQuadrants) {
  const std::vector<FeatureCandidate> c{cand(100, 100), cand(500, 100), cand(100, 400),
                                        cand(500, 400)};
  EXPECT_EQ(select_features_3priority({}, c, kBounds, opts(4)), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Selector, SuppressesNearTrackedFeature) {
  const std::vector<TrackedFeature> tracked{{7, Eigen::Vector2d(100, 100), 3}};
  const std::vector<FeatureCandidate> c{cand(105, 100, 100.0), cand(500, 400)};
  const auto sel = select_features_3priority(tracked, c, kBounds, opts(4));
  EXPECT_EQ(sel, std::vector<int>{1});
}

TEST(Selector, ClusteredQuadrantPicksBestScore) {
  // Hand trace: the root (13 features) splits once into quadrants holding
  // 10, 1, 1, 1 features; four eligible leaves already meet K = 4, so the
  // cluster leaf contributes its score-10 candidate.
  std::vector<FeatureCandidate> c;
  for (int i = 0; i < 10; ++i) c.push_back(cand(20 + 25 * i, 20 + 10 * i, i + 1.0));
  c.push_back(cand(500, 100));
  c.push_back(cand(100, 400));
  c.push_back(cand(500, 400));
  EXPECT_EQ(select_features_3priority({}, c, kBounds, opts(4)), (std::vector<int>{9, 10, 11, 12}));
}

TEST(Selector, EmptyCandidates) {
  EXPECT_TRUE(select_features_3priority({}, {}, kBounds, opts(10)).empty());
}

TEST(Selector, Properties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480), us(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrackedFeature> tracked;
    for (int i = 0; i < 30; ++i) tracked.push_back({i, Eigen::Vector2d(ux(rng), uy(rng)), 1});
    std::vector<FeatureCandidate> c;
    for (int i = 0; i < 400; ++i) c.push_back(cand(ux(rng), uy(rng), us(rng)));
    const int k = 5 + trial;
    const auto a = select_features_3priority(tracked, c, kBounds, opts(k, 12.0));
    const auto b = select_features_3priority(tracked, c, kBounds, opts(k, 12.0));
    EXPECT_EQ(a, b);
    EXPECT_LE(static_cast<int>(a.size()), k);
    for (int i : a) {
      for (const auto& t : tracked) EXPECT_GT((t.pixel - c[i].pixel).norm(), 12.0);
    }
  }
}

TEST(Selector, WellSeparatedInputsFillTarget) {
  std::vector<FeatureCandidate> c;
  for (int gx = 0; gx < 8; ++gx) {
    for (int gy = 0; gy < 8; ++gy) c.push_back(cand(40 + 80 * gx, 30 + 60 * gy));
  }
  EXPECT_EQ(select_features_3priority({}, c, kBounds, opts(64)).size(), 64u);
  EXPECT_EQ(select_features_3priority({}, c, kBounds, opts(100)).size(), 64u);
  EXPECT_EQ(select_features_3priority({}, c, kBounds, opts(20)).size(), 20u);
}

TEST(Selector, TieBreakLowestIndex) {
  const std::vector<FeatureCandidate> c{cand(10, 10, 2.0), cand(12, 12, 2.0)};
  SelectionOptions o = opts(1);
  EXPECT_EQ(select_features_3priority({}, c, kBounds, o), std::vector<int>{0});
}

TEST(Sfd, Examples) {
  std::vector<Eigen::Vector2d> one_per_cell;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) one_per_cell.emplace_back(40 + 80 * i, 30 + 60 * j);
  }
  EXPECT_DOUBLE_EQ(compute_sfd(one_per_cell, kBounds, 8), 0.0);
  const std::vector<Eigen::Vector2d> clumped(4, Eigen::Vector2d(1, 1));
  EXPECT_DOUBLE_EQ(compute_sfd(clumped, kBounds, 2), 3.0);
}

double sfd_oracle(const std::vector<Eigen::Vector2d>& pts, int g) {
  std::vector<double> counts(g * g, 0.0);
  for (const auto& p : pts) {
    const int i = std::min(g - 1, static_cast<int>(p.x() / (640.0 / g)));
    const int j = std::min(g - 1, static_cast<int>(p.y() / (480.0 / g)));
    counts[j * g + i] += 1.0;
  }
  double mean = 0.0;
  for (double v : counts) mean += v;
  mean /= counts.size();
  double var = 0.0;
  for (double v : counts) var += (v - mean) * (v - mean);
  return var / counts.size();
}

TEST(Sfd, ThreePriorityIsMoreUniformThanScoreOnly) {
  std::mt19937_64 rng(17);
  for (int scenario = 0; scenario < 20; ++scenario) {
    // a few dense high-score clusters over a sparse low-score background
    std::normal_distribution<double> spread(0.0, 25.0);
    std::uniform_real_distribution<double> ux(0, 640), uy(0, 480), us(0, 1);
    std::vector<FeatureCandidate> c;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d centre(ux(rng), uy(rng));
      for (int i = 0; i < 150; ++i) {
        Eigen::Vector2d p = centre + Eigen::Vector2d(spread(rng), spread(rng));
        p.x() = std::clamp(p.x(), 0.0, 639.0);
        p.y() = std::clamp(p.y(), 0.0, 479.0);
        c.push_back(FeatureCandidate{p, 1.0 + us(rng)});
      }
    }
    for (int i = 0; i < 150; ++i) c.push_back(cand(ux(rng), uy(rng), us(rng)));
    const int k = 100;
    std::vector<Eigen::Vector2d> quad, top;
    for (int i : select_features_3priority({}, c, kBounds, opts(k))) quad.push_back(c[i].pixel);
    for (int i : select_features_by_score(c, k)) top.push_back(c[i].pixel);
    const double a = compute_sfd(quad, kBounds);
    const double b = compute_sfd(top, kBounds);
    EXPECT_NEAR(a, sfd_oracle(quad, 8), 1e-12);
    EXPECT_NEAR(b, sfd_oracle(top, 8), 1e-12);
    EXPECT_LE(a, b) << "scenario " << scenario;
  }
}

std::vector<std::vector<FrameObservation>> single_camera(std::vector<FrameObservation> obs) {
  return {std::move(obs)};
}

TEST(TrackTable, StaticObservationsHaveZeroParallax) {
  FeatureTrackTable table(1);
  for (int f = 0; f < 5; ++f) {
    const auto u = update_track_table(
        table, f, single_camera({{1, {10, 10}, {}}, {2, {50, 60}, {}}}));
    EXPECT_DOUBLE_EQ(u.mean_parallax[0], 0.0);
  }
  EXPECT_DOUBLE_EQ(window_parallax(table, 0, 0, 4), 0.0);
}

TEST(TrackTable, ThreeFourFiveParallax) {
  FeatureTrackTable table(1);
  for (int f = 0; f < 10; ++f) {
    const auto u = update_track_table(
        table, f,
        single_camera({{1, {10.0 + 3 * f, 10.0 + 4 * f}, {}}, {2, {100.0 + 3 * f, 20.0 + 4 * f}, {}}}));
    if (f > 0) EXPECT_DOUBLE_EQ(u.mean_parallax[0], 5.0);
  }
  EXPECT_DOUBLE_EQ(window_parallax(table, 0, 0, 9), 45.0);
  EXPECT_DOUBLE_EQ(track_stability(table, 0, 0, 9), 10.0);
}

TEST(TrackTable, FrameOrderEnforced) {
  FeatureTrackTable table(1);
  update_track_table(table, 0, single_camera({{1, {0, 0}, {}}}));
  EXPECT_THROW(update_track_table(table, 2, single_camera({})), std::invalid_argument);
  EXPECT_THROW(update_track_table(table, 0, single_camera({})), std::invalid_argument);
  EXPECT_FALSE(table.append(0, 1, TrackPoint{0, {1, 1}, {}}));
}

TEST(TrackTable, DuplicateIdRejected) {
  FeatureTrackTable table(1);
  const auto u = update_track_table(table, 0, single_camera({{1, {0, 0}, {}}, {1, {5, 5}, {}}}));
  EXPECT_EQ(u.diagnostics.size(), 1u);
  ASSERT_NE(table.find(0, 1), nullptr);
  EXPECT_EQ(table.find(0, 1)->size(), 1u);
  EXPECT_EQ(table.find(0, 1)->front().pixel, Eigen::Vector2d(0, 0));
}

TEST(TrackTable, StabilityRanksLongerTracksHigher) {
  FeatureTrackTable table(2);
  for (int f = 0; f < 10; ++f) {
    std::vector<FrameObservation> a{{1, {0, 0}, {}}, {2, {5, 5}, {}}};
    std::vector<FrameObservation> b{{100 + f / 2, {0, 0}, {}}, {200 + f / 2, {5, 5}, {}}};
    update_track_table(table, f, {a, b});
  }
  EXPECT_DOUBLE_EQ(track_stability(table, 0, 0, 9), 10.0);
  EXPECT_DOUBLE_EQ(track_stability(table, 1, 0, 9), 2.0);
}

TEST(TrackTable, SimulatorLifespansMatchVisibilityRuns) {
  auto scene = testing::circle_scene(25, 3.0, 15.0, 600);
  for (int c = 0; c < scene.rig.size(); ++c) {
    const auto& cam = scene.rig.cameras[c];
    std::multiset<int> expected;
    for (const auto& lm : scene.cloud.landmarks) {
      int run = 0;
      for (int f = 0; f <= 25; ++f) {
        bool visible = false;
        if (f < 25) {
          const Eigen::Vector3d pc =
              inverse(scene.trajectory[f] * cam.extrinsic.cam_in_body) * lm.position;
          const auto px = project(pc, cam.intrinsic);
          visible = px && cam.intrinsic.in_image(*px) && pc.norm() >= scene.cloud.min_depth &&
                    pc.norm() <= scene.cloud.max_depth;
        }
        if (visible) {
          ++run;
        } else if (run > 0) {
          expected.insert(run);
          run = 0;
        }
      }
    }
    std::multiset<int> actual;
    double sum = 0.0;
    int n = 0;
    for (const auto& [id, track] : scene.sim.tracks.tracks(c)) {
      actual.insert(static_cast<int>(track.size()));
      int inside = 0;
      for (const auto& p : track) inside += p.frame >= 5 && p.frame <= 14;
      if (inside > 0) {
        sum += inside;
        ++n;
      }
    }
    EXPECT_EQ(actual, expected);
    EXPECT_NEAR(track_stability(scene.sim.tracks, c, 5, 14), sum / n, 1e-12);
  }
}

TEST(Descriptor, HexRoundTrip) {
  std::mt19937_64 rng(1);
  Descriptor d{rng(), rng(), rng(), rng()};
  const std::string hex = to_hex(d);
  EXPECT_EQ(hex.size(), 64u);
  EXPECT_EQ(*descriptor_from_hex(hex), d);
  EXPECT_FALSE(descriptor_from_hex("xyz").has_value());
  Descriptor e = d;
  flip_bit(e, 0);
  flip_bit(e, 255);
  EXPECT_EQ(hamming(d, e), 2);
  EXPECT_NE(get_bit(d, 0), get_bit(e, 0));
}

}  // namespace
}  // namespace mcvo
