#include "mcvo/loop/verification.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <Eigen/SVD>

#include "mcvo/init/two_view.hpp"

namespace mcvo {

namespace {

/// Rigid transform T with dst ~ T * src.
std::optional<Pose> kabsch(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst) {
  const std::size_t n = src.size();
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) H += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-9 * std::max(1.0, svd.singularValues()(0))) return std::nullopt;
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();
  return Pose(Eigen::Quaterniond(R), cd - R * cs);
}

}  // namespace

std::vector<std::pair<int, int>> match_descriptors(const KeyframeBundle& query,
                                                   const KeyframeBundle& match,
                                                   const LoopVerifyOptions& options) {
  const int nq = static_cast<int>(query.features.size());
  const int nm = static_cast<int>(match.features.size());
  std::vector<int> best_q(nq, -1), best_m(nm, -1);
  std::vector<int> dist_q(nq, std::numeric_limits<int>::max());
  std::vector<int> second_q(nq, std::numeric_limits<int>::max());
  std::vector<int> dist_m(nm, std::numeric_limits<int>::max());
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < nm; ++j) {
      if (!match.features[j].point) continue;
      const int h = hamming(query.features[i].descriptor, match.features[j].descriptor);
      if (h < dist_q[i]) {
        second_q[i] = dist_q[i];
        dist_q[i] = h;
        best_q[i] = j;
      } else if (h < second_q[i]) {
        second_q[i] = h;
      }
      if (h < dist_m[j]) {
        dist_m[j] = h;
        best_m[j] = i;
      }
    }
  }
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < nq; ++i) {
    const int j = best_q[i];
    if (j < 0 || best_m[j] != i || dist_q[i] > options.max_hamming) continue;
    if (second_q[i] != std::numeric_limits<int>::max() &&
        !(dist_q[i] < options.ratio * second_q[i])) {
      continue;
    }
    out.emplace_back(i, j);
  }
  return out;
}

LoopCandidate verify_loop(LoopCandidate candidate, const KeyframeBundle& query,
                          const KeyframeBundle& match,
                          const std::vector<CameraExtrinsic>& extrinsics,
                          const LoopVerifyOptions& options) {
  candidate.verified = false;
  candidate.relative_pose.reset();
  candidate.inliers = 0;
  const auto matches = match_descriptors(query, match, options);
  if (static_cast<int>(matches.size()) < options.min_inliers) {
    candidate.reason = "too few descriptor matches (" + std::to_string(matches.size()) + ")";
    return candidate;
  }
  std::vector<int> with_points;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    if (query.features[matches[k].first].point) with_points.push_back(static_cast<int>(k));
  }
  if (with_points.size() < 3) {
    candidate.reason = "too few matches with local structure";
    return candidate;
  }

  auto inliers_of = [&](const Pose& match_T_query) {
    std::vector<int> in;
    for (std::size_t k = 0; k < matches.size(); ++k) {
      const auto& qf = query.features[matches[k].first];
      const auto& mf = match.features[matches[k].second];
      const Pose cam = match_T_query * extrinsics.at(qf.camera).cam_in_body;
      const Eigen::Vector3d pc = inverse(cam) * *mf.point;
      if (pc.dot(qf.ray) > 0.0 && ray_angle(qf.ray, pc) < options.inlier_angle) {
        in.push_back(static_cast<int>(k));
      }
    }
    return in;
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, with_points.size() - 1);
  std::vector<int> best;
  Pose best_pose;
  for (int it = 0; it < options.ransac_iterations; ++it) {
    const int a = with_points[pick(rng)], b = with_points[pick(rng)], c = with_points[pick(rng)];
    if (a == b || b == c || a == c) continue;
    std::vector<Eigen::Vector3d> src, dst;
    for (int k : {a, b, c}) {
      src.push_back(*query.features[matches[k].first].point);
      dst.push_back(*match.features[matches[k].second].point);
    }
    const auto T = kabsch(src, dst);
    if (!T) continue;
    auto in = inliers_of(*T);
    if (in.size() > best.size()) {
      best = std::move(in);
      best_pose = *T;
    }
  }
  if (static_cast<int>(best.size()) < std::max(options.min_inliers, 4)) {
    candidate.inliers = static_cast<int>(best.size());
    candidate.reason = "geometric consensus too small (" + std::to_string(best.size()) + ")";
    return candidate;
  }

  for (int round = 0; round < 2; ++round) {
    std::vector<PnpCorrespondence> corr;
    for (int k : best) {
      const auto& qf = query.features[matches[k].first];
      corr.push_back({*match.features[matches[k].second].point, qf.ray,
                      extrinsics.at(qf.camera).cam_in_body});
    }
    const PnpResult refined = pnp_refine(corr, best_pose);
    auto in = inliers_of(refined.pose);
    if (in.size() < 4) break;
    best_pose = refined.pose;
    best = std::move(in);
  }
  candidate.inliers = static_cast<int>(best.size());
  if (candidate.inliers < options.min_inliers) {
    candidate.reason = "too few inliers after refinement (" + std::to_string(best.size()) + ")";
    return candidate;
  }
  candidate.verified = true;
  candidate.relative_pose = best_pose;
  candidate.reason.clear();
  return candidate;
}

}  // namespace mcvo
