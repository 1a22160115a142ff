#include "mcvo/init/two_view.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace mcvo {

namespace {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

Matrix3 fit_essential(std::span<const Vector3> first, std::span<const Vector3> second,
                      std::span<const int> indices) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(indices.size()), 9);
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const Vector3& f1 = first[indices[r]];
    const Vector3& f2 = second[indices[r]];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) A(r, 3 * i + j) = f2[i] * f1[j];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Matrix3 E;
  E << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
  Eigen::JacobiSVD<Matrix3> esvd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return esvd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
         esvd.matrixV().transpose();
}

double epipolar_error(const Matrix3& E, const Vector3& f1, const Vector3& f2) {
  const Vector3 l2 = E * f1;
  const Vector3 l1 = E.transpose() * f2;
  const double num = std::abs(f2.dot(l2));
  const double n2 = l2.norm();
  const double n1 = l1.norm();
  if (n1 < 1e-15 || n2 < 1e-15) return std::numeric_limits<double>::infinity();
  return std::max(num / n2, num / n1);
}

std::vector<int> epipolar_inliers(const Matrix3& E, std::span<const Vector3> first,
                                  std::span<const Vector3> second, double threshold) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(first.size()); ++i) {
    if (epipolar_error(E, first[i], second[i]) < threshold) out.push_back(i);
  }
  return out;
}

/// Fraction of pairs explained by a pure rotation within the threshold.
double rotation_only_fraction(std::span<const Vector3> first, std::span<const Vector3> second,
                              double threshold) {
  Matrix3 H = Matrix3::Zero();
  for (std::size_t i = 0; i < first.size(); ++i) H += first[i] * second[i].transpose();
  Eigen::JacobiSVD<Matrix3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 D = Matrix3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Matrix3 R = svd.matrixV() * D * svd.matrixU().transpose();
  int explained = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (ray_angle(second[i], R * first[i]) < threshold) ++explained;
  }
  return static_cast<double>(explained) / static_cast<double>(first.size());
}

Vector3 tangent_axis(const Vector3& f) {
  const Vector3 a = std::abs(f.x()) < 0.9 ? Vector3::UnitX() : Vector3::UnitY();
  return f.cross(a).normalized();
}

}  // namespace

double ray_angle(const Eigen::Vector3d& ray, const Eigen::Vector3d& point_in_cam) {
  return std::atan2(ray.cross(point_in_cam).norm(), ray.dot(point_in_cam));
}

RelativePoseResult estimate_relative_pose(std::span<const Eigen::Vector3d> first,
                                          std::span<const Eigen::Vector3d> second,
                                          const RelativePoseOptions& options) {
  if (first.size() != second.size()) {
    throw std::invalid_argument("relative pose needs paired rays");
  }
  RelativePoseResult result;
  result.inliers.assign(first.size(), false);
  const int n = static_cast<int>(first.size());
  if (n < 8) {
    result.failure = RelativePoseFailure::kTooFewMatches;
    return result;
  }
  if (rotation_only_fraction(first, second, 2.0 * options.inlier_threshold) >= 0.9) {
    result.failure = RelativePoseFailure::kLowParallax;
    return result;
  }

  std::mt19937_64 rng(options.seed);
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> best_inliers;
  std::array<int, 8> sample{};
  for (int it = 0; it < options.ransac_iterations; ++it) {
    for (int k = 0; k < 8; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
      sample[k] = pool[k];
    }
    const Matrix3 E = fit_essential(first, second, sample);
    auto inliers = epipolar_inliers(E, first, second, options.inlier_threshold);
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }
  if (best_inliers.size() < 8) {
    result.failure = RelativePoseFailure::kTooFewMatches;
    return result;
  }
  // least-squares refit on the consensus set
  Matrix3 E = fit_essential(first, second, best_inliers);
  auto refit = epipolar_inliers(E, first, second, options.inlier_threshold);
  if (refit.size() >= 8) {
    best_inliers = std::move(refit);
    E = fit_essential(first, second, best_inliers);
  }

  Eigen::JacobiSVD<Matrix3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 U = svd.matrixU();
  Matrix3 V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Matrix3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Matrix3 rotations[2] = {U * W * V.transpose(), U * W.transpose() * V.transpose()};
  const Vector3 t = U.col(2);

  std::vector<Vector3> f1s, f2s;
  for (int i : best_inliers) {
    f1s.push_back(first[i]);
    f2s.push_back(second[i]);
  }
  int best_valid = -1;
  Pose best_pose;
  std::vector<TriangulatedPoint> best_points;
  for (const Matrix3& R : rotations) {
    for (double sign : {1.0, -1.0}) {
      const Pose second_T_first(R, sign * t);
      const Pose first_T_second = inverse(second_T_first);
      auto points = triangulate(Pose::Identity(), first_T_second, f1s, f2s);
      const int valid = static_cast<int>(
          std::count_if(points.begin(), points.end(), [](const auto& p) { return p.valid; }));
      if (valid > best_valid) {
        best_valid = valid;
        best_pose = first_T_second;
        best_points = std::move(points);
      }
    }
  }
  if (best_valid < 8) {
    result.failure = RelativePoseFailure::kCheirality;
    return result;
  }

  best_pose.translation.normalize();
  result.ok = true;
  result.first_T_second = best_pose;
  for (std::size_t k = 0; k < best_inliers.size(); ++k) {
    if (best_points[k].valid) {
      result.inliers[best_inliers[k]] = true;
      ++result.inlier_count;
    }
  }
  return result;
}

std::vector<TriangulatedPoint> triangulate(const Pose& first, const Pose& second,
                                           std::span<const Eigen::Vector3d> first_rays,
                                           std::span<const Eigen::Vector3d> second_rays,
                                           double min_angle) {
  if (first_rays.size() != second_rays.size()) {
    throw std::invalid_argument("triangulation needs paired rays");
  }
  std::vector<TriangulatedPoint> out(first_rays.size());
  const Vector3 c1 = first.translation;
  const Vector3 c2 = second.translation;
  for (std::size_t i = 0; i < first_rays.size(); ++i) {
    const Vector3 d1 = (first.rotation * first_rays[i]).normalized();
    const Vector3 d2 = (second.rotation * second_rays[i]).normalized();
    if (ray_angle(d1, d2) < min_angle) continue;
    Eigen::Matrix<double, 3, 2> A;
    A.col(0) = d1;
    A.col(1) = -d2;
    const Eigen::Vector2d ab = A.colPivHouseholderQr().solve(c2 - c1);
    if (!(ab[0] > 0.0) || !(ab[1] > 0.0)) continue;
    auto& p = out[i];
    p.valid = true;
    p.depth_first = ab[0];
    p.depth_second = ab[1];
    p.point = 0.5 * (c1 + ab[0] * d1 + c2 + ab[1] * d2);
  }
  return out;
}

std::optional<Eigen::Vector3d> triangulate_multiview(std::span<const Pose> world_T_cams,
                                                     std::span<const Eigen::Vector3d> rays,
                                                     double min_angle) {
  if (world_T_cams.size() != rays.size() || rays.size() < 2) return std::nullopt;
  Matrix3 A = Matrix3::Zero();
  Vector3 b = Vector3::Zero();
  std::vector<Vector3> dirs;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const Vector3 d = (world_T_cams[i].rotation * rays[i]).normalized();
    const Matrix3 P = Matrix3::Identity() - d * d.transpose();
    A += P;
    b += P * world_T_cams[i].translation;
    dirs.push_back(d);
  }
  double widest = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      widest = std::max(widest, ray_angle(dirs[i], dirs[j]));
    }
  }
  if (widest < min_angle) return std::nullopt;
  const Vector3 p = A.ldlt().solve(b);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if ((p - world_T_cams[i].translation).dot(dirs[i]) <= 0.0) return std::nullopt;
  }
  if (!p.allFinite()) return std::nullopt;
  return p;
}

namespace {

struct PnpLinearization {
  Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  double cost = 0.0;
};

PnpLinearization linearize_pnp(std::span<const PnpCorrespondence> corr, const Pose& pose,
                               bool with_jacobian) {
  PnpLinearization lin;
  const Pose body_T_world = inverse(pose);
  for (const auto& c : corr) {
    const Vector3 pb = body_T_world * c.point;
    const Vector3 pc = inverse(c.body_T_cam) * pb;
    const double norm = pc.norm();
    if (norm < 1e-12) continue;
    const Vector3 u = pc / norm;
    const Vector3 f = c.ray.normalized();
    const Vector3 b1 = tangent_axis(f);
    const Vector3 b2 = f.cross(b1);
    const Eigen::Vector2d r(b1.dot(u), b2.dot(u));
    lin.cost += r.squaredNorm();
    if (!with_jacobian) continue;

    Eigen::Matrix<double, 2, 3> B;
    B.row(0) = b1.transpose();
    B.row(1) = b2.transpose();
    const Matrix3 du = (Matrix3::Identity() - u * u.transpose()) / norm;
    const Eigen::Matrix<double, 2, 3> Jpb = B * du * c.body_T_cam.R().transpose();
    Eigen::Matrix<double, 2, 6> J;
    J.leftCols<3>() = Jpb * skew(pb);
    J.rightCols<3>() = -Jpb;
    lin.H += J.transpose() * J;
    lin.g += J.transpose() * r;
  }
  return lin;
}

}  // namespace

PnpResult pnp_refine(std::span<const PnpCorrespondence> correspondences, const Pose& initial,
                     const PnpOptions& options) {
  if (correspondences.size() < 4) {
    throw std::invalid_argument("pnp_refine needs at least four correspondences");
  }
  PnpResult result;
  result.pose = initial;
  double lambda = 1e-4;
  PnpLinearization lin = linearize_pnp(correspondences, result.pose, true);
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    Eigen::Matrix<double, 6, 6> A = lin.H;
    A.diagonal() += lambda * (lin.H.diagonal().array() + 1e-12).matrix();
    const Eigen::Matrix<double, 6, 1> delta = A.ldlt().solve(-lin.g);
    if (!delta.allFinite()) break;
    if (delta.norm() < options.step_tolerance) {
      result.converged = true;
      break;
    }
    const Pose candidate = box_plus(result.pose, delta);
    const double cost = linearize_pnp(correspondences, candidate, false).cost;
    if (cost < lin.cost) {
      result.pose = candidate;
      lin = linearize_pnp(correspondences, result.pose, true);
      lambda = std::max(lambda / 10.0, 1e-12);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        // no descent direction left: stationary point
        result.converged = true;
        break;
      }
    }
  }
  result.rms = std::sqrt(lin.cost / static_cast<double>(correspondences.size()));
  return result;
}

PnpResult pnp_refine(std::span<const Eigen::Vector3d> points,
                     std::span<const Eigen::Vector3d> rays, const Pose& initial,
                     const PnpOptions& options) {
  if (points.size() != rays.size()) throw std::invalid_argument("pnp needs paired inputs");
  std::vector<PnpCorrespondence> corr(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    corr[i].point = points[i];
    corr[i].ray = rays[i];
  }
  return pnp_refine(corr, initial, options);
}

}  // namespace mcvo
