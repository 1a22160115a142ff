#pragma once

#include <vector>

#include <Eigen/Core>

namespace mcvo {

struct ImageRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= x0 && p.y() >= y0 && p.x() < x1 && p.y() < y1;
  }
};

struct FeatureCandidate {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double score = 0.0;
};

struct TrackedFeature {
  int id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  int age = 1;
};

struct SelectionOptions {
  int target_count = 150;
  double suppression_radius = 10.0;
  /// Cells whose halves would be narrower than this are never split.
  double min_cell_side = 8.0;
};

/// Three-priority quadtree selection. Returns indices into `candidates`.
///
/// The tree holds tracked features and the candidates that survive the
/// tracked-neighbourhood suppression. Leaves are split one at a time, the
/// most populated first (ties by z-order of the leaf origin), until at least
/// target_count leaves hold candidates and no tracked feature, or nothing can
/// split further. Each of the first target_count such leaves (by population,
/// then z-order) contributes its highest-score candidate (ties: lowest index).
std::vector<int> select_features_3priority(
    const std::vector<TrackedFeature>& tracked,
    const std::vector<FeatureCandidate>& candidates, const ImageRect& bounds,
    const SelectionOptions& options);

/// Score-only baseline: top target_count candidates by score.
std::vector<int> select_features_by_score(
    const std::vector<FeatureCandidate>& candidates, int target_count);

/// Variance of per-cell feature counts on a grid x grid partition of bounds.
double compute_sfd(const std::vector<Eigen::Vector2d>& features,
                   const ImageRect& bounds, int grid = 8);

}  // namespace mcvo
