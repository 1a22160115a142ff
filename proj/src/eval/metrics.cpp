#include "mcvo/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace mcvo {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

struct Associated {
  std::vector<Pose> est;
  std::vector<Pose> gt;
};

Associated associated(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  Associated out;
  for (const auto& [i, j] : associate(est, gt)) {
    out.est.push_back(est.poses[i]);
    out.gt.push_back(gt.poses[j]);
  }
  return out;
}

Eigen::Matrix3Xd positions(const std::vector<Pose>& poses) {
  Eigen::Matrix3Xd m(3, poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) m.col(i) = poses[i].translation;
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<std::pair<int, int>> associate(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                                           double tolerance) {
  std::vector<std::pair<int, int>> out;
  const auto& g = gt.timestamps;
  for (std::size_t i = 0; i < est.timestamps.size(); ++i) {
    const double t = est.timestamps[i];
    const auto it = std::lower_bound(g.begin(), g.end(), t);
    int best = -1;
    double best_dt = 0.0;
    auto consider = [&](std::vector<double>::const_iterator c) {
      const double dt = std::abs(*c - t);
      if (dt <= tolerance && (best < 0 || dt < best_dt)) {
        best = static_cast<int>(c - g.begin());
        best_dt = dt;
      }
    };
    if (it != g.begin()) consider(it - 1);
    if (it != g.end()) consider(it);
    if (best >= 0) out.emplace_back(static_cast<int>(i), best);
  }
  return out;
}

AteResult ate(const TrajectoryRecord& est, const TrajectoryRecord& gt, Alignment alignment) {
  const Associated a = associated(est, gt);
  if (a.est.size() < 3) throw std::invalid_argument("ATE needs at least three associated poses");
  const Eigen::Matrix3Xd src = positions(a.est);
  const Eigen::Matrix3Xd dst = positions(a.gt);
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, alignment == Alignment::kSimilarity);
  AteResult r;
  r.pairs = static_cast<int>(a.est.size());
  r.scale = T.block<3, 1>(0, 0).norm();
  const Eigen::Matrix3d R = T.topLeftCorner<3, 3>() / r.scale;
  r.alignment = Pose(Eigen::Quaterniond(R), T.topRightCorner<3, 1>());
  double t2 = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < a.est.size(); ++i) {
    const Eigen::Vector3d p = r.scale * (R * src.col(i)) + T.topRightCorner<3, 1>();
    t2 += (p - dst.col(i)).squaredNorm();
    const Eigen::Quaterniond q = r.alignment.rotation * a.est[i].rotation;
    const double angle = rotation_angle(a.gt[i].rotation.conjugate() * q) * kRadToDeg;
    r2 += angle * angle;
  }
  r.translation_rmse = std::sqrt(t2 / r.pairs);
  r.rotation_rmse_deg = std::sqrt(r2 / r.pairs);
  return r;
}

std::vector<RpeSegment> rpe(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                            const std::vector<double>& segment_lengths) {
  const Associated a = associated(est, gt);
  const int n = static_cast<int>(a.gt.size());
  std::vector<double> dist(n, 0.0);
  for (int i = 1; i < n; ++i) {
    dist[i] = dist[i - 1] + (a.gt[i].translation - a.gt[i - 1].translation).norm();
  }
  std::vector<RpeSegment> out;
  for (double length : segment_lengths) {
    RpeSegment seg;
    seg.length = length;
    double tsum = 0.0, tsq = 0.0, rsum = 0.0, rsq = 0.0;
    int b = 0;
    for (int s = 0; s < n; ++s) {
      b = std::max(b, s + 1);
      while (b < n && dist[b] - dist[s] < length) ++b;
      if (b >= n) break;
      const double d = dist[b] - dist[s];
      const Pose g = inverse(a.gt[s]) * a.gt[b];
      const Pose e = inverse(a.est[s]) * a.est[b];
      const Pose err = inverse(g) * e;
      const double tp = err.translation.norm() / d * 100.0;
      const double rd = rotation_angle(err.rotation) * kRadToDeg / d;
      tsum += tp;
      tsq += tp * tp;
      rsum += rd;
      rsq += rd * rd;
      ++seg.count;
    }
    if (seg.count == 0) {
      seg.skipped = true;
      seg.note = "trajectory shorter than " + fmt(length) + " m";
    } else {
      seg.translation_mean_pct = tsum / seg.count;
      seg.translation_rmse_pct = std::sqrt(tsq / seg.count);
      seg.rotation_mean_deg_per_m = rsum / seg.count;
      seg.rotation_rmse_deg_per_m = std::sqrt(rsq / seg.count);
    }
    out.push_back(seg);
  }
  return out;
}

std::vector<double> default_segment_lengths(double divisor) {
  return {10.0 / divisor, 50.0 / divisor, 100.0 / divisor, 200.0 / divisor};
}

double scale_drift(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  const Associated a = associated(est, gt);
  if (a.gt.size() < 3) throw std::invalid_argument("scale drift needs at least three poses");
  Eigen::Matrix3Xd g = positions(a.gt);
  g.colwise() -= g.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(g);
  const auto sv = svd.singularValues();
  if (!(sv(1) > 1e-9 * std::max(sv(0), 1e-300))) {
    throw std::invalid_argument("scale drift is undefined for collinear ground truth");
  }
  return std::abs(ate(est, gt, Alignment::kSimilarity).scale - 1.0) * 100.0;
}

double path_length(const TrajectoryRecord& gt) {
  double d = 0.0;
  for (std::size_t i = 1; i < gt.size(); ++i) {
    d += (gt.poses[i].translation - gt.poses[i - 1].translation).norm();
  }
  return d;
}

MetricReport evaluate(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                      const std::vector<double>& segment_lengths) {
  MetricReport report;
  report.ate_rigid = ate(est, gt, Alignment::kRigid);
  report.ate_similarity = ate(est, gt, Alignment::kSimilarity);
  report.rpe = rpe(est, gt, segment_lengths);
  report.scale_drift_pct = scale_drift(est, gt);
  TrajectoryRecord matched;
  for (const auto& [i, j] : associate(est, gt)) {
    matched.timestamps.push_back(gt.timestamps[j]);
    matched.poses.push_back(gt.poses[j]);
  }
  report.path_length = path_length(matched);
  return report;
}

std::string format_metric_report(const MetricReport& report, bool with_timing) {
  std::string out;
  auto line = [&](const std::string& key, double v) { out += key + " " + fmt(v) + "\n"; };
  line("pairs", report.ate_rigid.pairs);
  line("path_length_m", report.path_length);
  line("ate_rigid_translation_rmse_m", report.ate_rigid.translation_rmse);
  line("ate_rigid_rotation_rmse_deg", report.ate_rigid.rotation_rmse_deg);
  line("ate_similarity_translation_rmse_m", report.ate_similarity.translation_rmse);
  line("ate_similarity_rotation_rmse_deg", report.ate_similarity.rotation_rmse_deg);
  line("similarity_scale", report.ate_similarity.scale);
  line("scale_drift_pct", report.scale_drift_pct);
  for (const auto& s : report.rpe) {
    const std::string key = "rpe_" + fmt(s.length) + "m";
    if (s.skipped) {
      out += key + " skipped (" + s.note + ")\n";
      continue;
    }
    line(key + "_count", s.count);
    line(key + "_translation_mean_pct", s.translation_mean_pct);
    line(key + "_translation_rmse_pct", s.translation_rmse_pct);
    line(key + "_rotation_mean_deg_per_m", s.rotation_mean_deg_per_m);
    line(key + "_rotation_rmse_deg_per_m", s.rotation_rmse_deg_per_m);
  }
  if (with_timing) {
    for (const auto& [stage, seconds] : report.timing) line("time_" + stage + "_s", seconds);
  }
  return out;
}

}  // namespace mcvo
