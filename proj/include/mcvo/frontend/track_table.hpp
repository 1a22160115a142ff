#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/frontend/descriptor.hpp"

namespace mcvo {

struct TrackPoint {
  int frame = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  std::optional<Descriptor> descriptor;
};

using Track = std::vector<TrackPoint>;

/// Per-camera feature tracks keyed by track id. A track never spans cameras
/// and its frame indices are strictly increasing.
class FeatureTrackTable {
 public:
  FeatureTrackTable() = default;
  explicit FeatureTrackTable(int num_cameras) : tracks_(num_cameras) {}

  int num_cameras() const { return static_cast<int>(tracks_.size()); }
  void resize(int num_cameras) { tracks_.resize(num_cameras); }

  const std::map<int, Track>& tracks(int camera) const { return tracks_.at(camera); }
  const Track* find(int camera, int track_id) const;

  /// Appends one observation. Returns false (and leaves the table unchanged)
  /// when the frame does not come after the track's last frame.
  bool append(int camera, int track_id, const TrackPoint& point);

  /// Lowest / highest frame index seen; -1 when empty.
  int first_frame() const { return first_frame_; }
  int last_frame() const { return last_frame_; }
  void set_last_frame(int frame);

  /// Observations of one camera at one frame, ordered by track id.
  std::vector<std::pair<int, TrackPoint>> observations_at(int camera, int frame) const;

  bool empty() const;
  std::size_t observation_count() const;

  bool operator==(const FeatureTrackTable& other) const;

 private:
  std::vector<std::map<int, Track>> tracks_;
  int first_frame_ = -1;
  int last_frame_ = -1;
};

struct FrameObservation {
  int track_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  std::optional<Descriptor> descriptor;
};

struct TrackUpdate {
  /// Mean displacement (px) between this frame and the previous one over
  /// tracks observed in both, per camera.
  std::vector<double> mean_parallax;
  std::vector<std::string> diagnostics;
};

/// Extends the table with the observations of frame_index. frame_index must
/// be last_frame() + 1 on a non-empty table (std::invalid_argument otherwise).
/// A track id repeated within one frame keeps its first observation.
TrackUpdate update_track_table(
    FeatureTrackTable& table, int frame_index,
    const std::vector<std::vector<FrameObservation>>& per_camera);

/// Mean displacement between the first and last frame of [first, last] over
/// tracks observed at both ends.
double window_parallax(const FeatureTrackTable& table, int camera, int first,
                       int last);

/// Mean number of observations inside [first, last] over every track with at
/// least one observation there; the principal-camera ranking statistic.
double track_stability(const FeatureTrackTable& table, int camera, int first,
                       int last);

}  // namespace mcvo
