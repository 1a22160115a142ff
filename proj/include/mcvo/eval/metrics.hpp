#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcvo/eval/io.hpp"

namespace mcvo {

enum class Alignment { kRigid, kSimilarity };

/// Index pairs (est, gt) by nearest timestamp within `tolerance` seconds.
std::vector<std::pair<int, int>> associate(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                                           double tolerance = 0.01);

struct AteResult {
  double translation_rmse = 0.0;
  double rotation_rmse_deg = 0.0;
  double scale = 1.0;
  int pairs = 0;
  /// gt_T_est alignment (rotation, translation) applied after scaling.
  Pose alignment;
};

/// Closed-form least-squares alignment of the estimate to ground truth over
/// associated positions. Throws std::invalid_argument below three pairs.
AteResult ate(const TrajectoryRecord& est, const TrajectoryRecord& gt,
              Alignment alignment = Alignment::kRigid);

struct RpeSegment {
  double length = 0.0;
  int count = 0;
  bool skipped = false;
  std::string note;
  /// Translation error as a percentage of the travelled ground-truth distance.
  double translation_mean_pct = 0.0;
  double translation_rmse_pct = 0.0;
  /// Rotation error per travelled meter.
  double rotation_mean_deg_per_m = 0.0;
  double rotation_rmse_deg_per_m = 0.0;
};

/// For every associated start pose, the first later pose at least `length`
/// meters further along the ground-truth path; errors of the relative motion
/// are normalized by the travelled ground-truth distance. Lengths longer
/// than the trajectory are skipped with a note.
std::vector<RpeSegment> rpe(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                            const std::vector<double>& segment_lengths);

/// {10, 50, 100, 200} m, divided by `divisor` for small scenes.
std::vector<double> default_segment_lengths(double divisor = 1.0);

/// |similarity scale - 1| * 100. Throws std::invalid_argument for fewer than
/// three pairs or collinear ground truth.
double scale_drift(const TrajectoryRecord& est, const TrajectoryRecord& gt);

struct MetricReport {
  AteResult ate_rigid;
  AteResult ate_similarity;
  std::vector<RpeSegment> rpe;
  double scale_drift_pct = 0.0;
  double path_length = 0.0;
  /// Stage name -> seconds.
  std::map<std::string, double> timing;
};

/// Ground-truth path length over associated poses.
double path_length(const TrajectoryRecord& gt);

MetricReport evaluate(const TrajectoryRecord& est, const TrajectoryRecord& gt,
                      const std::vector<double>& segment_lengths);

/// Key-value text report; timing lines are included only when `with_timing`.
std::string format_metric_report(const MetricReport& report, bool with_timing = false);

}  // namespace mcvo
