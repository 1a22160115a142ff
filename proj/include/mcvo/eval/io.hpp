#pragma once

#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/geometry/pose.hpp"

namespace mcvo {

/// Malformed input; `line` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_ = 0;
};

/// One camera per line:
///   cam <idx> <model> fx fy cx cy fov w h | tx ty tz qx qy qz qw
/// fov is the model's angular limit in radians; the extrinsic is the camera
/// in the body frame. Blank lines and lines starting with '#' are ignored.
/// Throws ParseError on malformed lines and std::invalid_argument when a
/// quaternion norm is off by more than 1e-3 or the rig is invalid.
RigConfig parse_rig_config(std::istream& in, const std::string& source = "<rig>");
RigConfig load_rig_config(const std::string& path);
std::string format_rig_config(const RigConfig& rig);
void write_rig_config(const RigConfig& rig, const std::string& path);

struct TrackFile {
  FeatureTrackTable tracks;
  /// Ground-truth body pose per frame, when present.
  std::map<int, Pose> ground_truth;
  double frame_rate = 10.0;
  std::vector<std::string> diagnostics;
};

/// Header "MCVOTRK1", then
///   rate <hz>
///   obs <frame> <cam> <track_id> <u> <v> [<64-hex descriptor>]
///   gt <frame> tx ty tz qx qy qz qw
/// An empty file is an empty table. A repeated (camera, track, frame) row is
/// reported in diagnostics and the first one kept; a row going back in time
/// within a track is a ParseError.
TrackFile parse_tracks(std::istream& in, const std::string& source = "<tracks>");
TrackFile load_tracks(const std::string& path);
/// Rows ordered by frame, camera, track id; values printed losslessly.
std::string format_tracks(const TrackFile& file);
void write_tracks(const TrackFile& file, const std::string& path);

struct TrajectoryRecord {
  std::vector<double> timestamps;
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  /// Throws std::invalid_argument unless sizes match and timestamps strictly
  /// increase.
  void validate() const;
};

/// "timestamp tx ty tz qx qy qz qw": timestamp with 8 decimals, the rest with
/// 9 significant digits.
std::string format_trajectory(const TrajectoryRecord& record);
void write_trajectory(const TrajectoryRecord& record, const std::string& path);
TrajectoryRecord parse_trajectory(std::istream& in, const std::string& source = "<trajectory>");
TrajectoryRecord load_trajectory(const std::string& path);

/// Writes `content` to `path`; throws std::runtime_error on failure.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace mcvo
