#include "mcvo/eval/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace mcvo {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool skip_line(const std::vector<std::string>& tokens) {
  return tokens.empty() || tokens[0][0] == '#';
}

class LineParser {
 public:
  LineParser(const std::string& source, int line) : source_(source), line_(line) {}

  double real(const std::string& tok) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      fail("expected a number, got '" + tok + "'");
    }
    return v;
  }

  int integer(const std::string& tok) const {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail("expected an integer, got '" + tok + "'");
    }
    return v;
  }

  /// Seven numbers starting at tokens[i]: translation then (qx, qy, qz, qw).
  Pose pose(const std::vector<std::string>& t, std::size_t i, double max_norm_error) const {
    const Eigen::Vector3d p(real(t[i]), real(t[i + 1]), real(t[i + 2]));
    Eigen::Quaterniond q(real(t[i + 6]), real(t[i + 3]), real(t[i + 4]), real(t[i + 5]));
    const double n = q.norm();
    if (std::abs(n - 1.0) > max_norm_error) {
      throw std::invalid_argument(source_ + ":" + std::to_string(line_) +
                                  ": quaternion norm " + std::to_string(n) + " is not unit");
    }
    if (std::abs(n - 1.0) > 1e-12) q.normalize();
    return Pose(q, p);
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

 private:
  const std::string& source_;
  int line_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_pose17(const Pose& p) {
  const auto& q = p.rotation;
  std::string out;
  for (double v : {p.translation.x(), p.translation.y(), p.translation.z(), q.x(), q.y(), q.z(),
                   q.w()}) {
    out += ' ';
    out += fmt17(v);
  }
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
      line_(line) {}

RigConfig parse_rig_config(std::istream& in, const std::string& source) {
  std::map<int, Camera> cameras;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto t = split_ws(line);
    if (skip_line(t)) continue;
    const LineParser p(source, number);
    if (t[0] != "cam") p.fail("unknown record '" + t[0] + "'");
    if (t.size() != 18 || t[10] != "|") {
      p.fail("expected 'cam <idx> <model> fx fy cx cy fov w h | tx ty tz qx qy qz qw'");
    }
    const int idx = p.integer(t[1]);
    const auto model = camera_model_from_string(t[2]);
    if (!model) p.fail("unknown camera model '" + t[2] + "'");
    Camera cam;
    cam.intrinsic.model = *model;
    cam.intrinsic.fx = p.real(t[3]);
    cam.intrinsic.fy = p.real(t[4]);
    cam.intrinsic.cx = p.real(t[5]);
    cam.intrinsic.cy = p.real(t[6]);
    cam.intrinsic.fov_limit = p.real(t[7]);
    cam.intrinsic.width = p.integer(t[8]);
    cam.intrinsic.height = p.integer(t[9]);
    cam.extrinsic.cam_in_body = p.pose(t, 11, 1e-3);
    if (!cameras.emplace(idx, cam).second) p.fail("duplicate camera index " + std::to_string(idx));
  }
  RigConfig rig;
  int expected = 0;
  for (auto& [idx, cam] : cameras) {
    if (idx != expected++) throw ParseError(source, 0, "camera indices must be 0..N-1");
    rig.cameras.push_back(cam);
  }
  rig.validate();
  return rig;
}

RigConfig load_rig_config(const std::string& path) {
  auto in = open_input(path);
  return parse_rig_config(in, path);
}

std::string format_rig_config(const RigConfig& rig) {
  std::string out;
  for (int c = 0; c < rig.size(); ++c) {
    const auto& k = rig.cameras[c].intrinsic;
    out += "cam " + std::to_string(c) + " " + to_string(k.model);
    for (double v : {k.fx, k.fy, k.cx, k.cy, k.fov_limit}) out += " " + fmt17(v);
    out += " " + std::to_string(k.width) + " " + std::to_string(k.height) + " |";
    out += format_pose17(rig.cameras[c].extrinsic.cam_in_body) + "\n";
  }
  return out;
}

void write_rig_config(const RigConfig& rig, const std::string& path) {
  write_text_file(path, format_rig_config(rig));
}

TrackFile parse_tracks(std::istream& in, const std::string& source) {
  TrackFile file;
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    const auto t = split_ws(line);
    if (skip_line(t)) continue;
    const LineParser p(source, number);
    if (!header) {
      if (t.size() != 1 || t[0] != "MCVOTRK1") p.fail("missing MCVOTRK1 header");
      header = true;
      continue;
    }
    if (t[0] == "rate") {
      if (t.size() != 2) p.fail("expected 'rate <hz>'");
      file.frame_rate = p.real(t[1]);
      if (!(file.frame_rate > 0.0)) p.fail("frame rate must be positive");
    } else if (t[0] == "gt") {
      if (t.size() != 9) p.fail("expected 'gt <frame> tx ty tz qx qy qz qw'");
      file.ground_truth[p.integer(t[1])] = p.pose(t, 2, 1e-3);
    } else if (t[0] == "obs") {
      if (t.size() != 6 && t.size() != 7) p.fail("expected 'obs <frame> <cam> <id> <u> <v> [hex]'");
      const int frame = p.integer(t[1]);
      const int cam = p.integer(t[2]);
      const int id = p.integer(t[3]);
      if (frame < 0 || cam < 0) p.fail("negative frame or camera index");
      TrackPoint point;
      point.frame = frame;
      point.pixel = Eigen::Vector2d(p.real(t[4]), p.real(t[5]));
      if (t.size() == 7) {
        point.descriptor = descriptor_from_hex(t[6]);
        if (!point.descriptor) p.fail("malformed descriptor");
      }
      if (cam >= file.tracks.num_cameras()) file.tracks.resize(cam + 1);
      const Track* track = file.tracks.find(cam, id);
      if (track && !track->empty() && track->back().frame == frame) {
        file.diagnostics.push_back(source + ":" + std::to_string(number) +
                                   ": duplicate observation of camera " + std::to_string(cam) +
                                   " track " + std::to_string(id) + " at frame " +
                                   std::to_string(frame) + "; first kept");
        continue;
      }
      if (!file.tracks.append(cam, id, point)) {
        p.fail("frame " + std::to_string(frame) + " goes back in time for camera " +
               std::to_string(cam) + " track " + std::to_string(id));
      }
    } else {
      p.fail("unknown record '" + t[0] + "'");
    }
  }
  return file;
}

TrackFile load_tracks(const std::string& path) {
  auto in = open_input(path);
  return parse_tracks(in, path);
}

std::string format_tracks(const TrackFile& file) {
  std::ostringstream out;
  out << "MCVOTRK1\n";
  out << "rate " << fmt17(file.frame_rate) << "\n";
  // (frame, camera, id) -> point
  std::map<std::tuple<int, int, int>, const TrackPoint*> rows;
  for (int c = 0; c < file.tracks.num_cameras(); ++c) {
    for (const auto& [id, track] : file.tracks.tracks(c)) {
      for (const auto& p : track) rows[{p.frame, c, id}] = &p;
    }
  }
  auto gt = file.ground_truth.begin();
  for (const auto& [key, p] : rows) {
    const auto [frame, cam, id] = key;
    for (; gt != file.ground_truth.end() && gt->first <= frame; ++gt) {
      out << "gt " << gt->first << format_pose17(gt->second) << "\n";
    }
    out << "obs " << frame << " " << cam << " " << id << " " << fmt17(p->pixel.x()) << " "
        << fmt17(p->pixel.y());
    if (p->descriptor) out << " " << to_hex(*p->descriptor);
    out << "\n";
  }
  for (; gt != file.ground_truth.end(); ++gt) {
    out << "gt " << gt->first << format_pose17(gt->second) << "\n";
  }
  return out.str();
}

void write_tracks(const TrackFile& file, const std::string& path) {
  write_text_file(path, format_tracks(file));
}

void TrajectoryRecord::validate() const {
  if (timestamps.size() != poses.size()) {
    throw std::invalid_argument("trajectory timestamps and poses differ in length");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw std::invalid_argument("trajectory timestamps must strictly increase");
    }
  }
}

std::string format_trajectory(const TrajectoryRecord& record) {
  record.validate();
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < record.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.8f", record.timestamps[i]);
    out += buf;
    const Pose& p = record.poses[i];
    const auto& q = p.rotation;
    for (double v : {p.translation.x(), p.translation.y(), p.translation.z(), q.x(), q.y(), q.z(),
                     q.w()}) {
      std::snprintf(buf, sizeof buf, " %.9g", v == 0.0 ? 0.0 : v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_trajectory(const TrajectoryRecord& record, const std::string& path) {
  write_text_file(path, format_trajectory(record));
}

TrajectoryRecord parse_trajectory(std::istream& in, const std::string& source) {
  TrajectoryRecord record;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto t = split_ws(line);
    if (skip_line(t)) continue;
    const LineParser p(source, number);
    if (t.size() != 8) p.fail("expected 'timestamp tx ty tz qx qy qz qw'");
    record.timestamps.push_back(p.real(t[0]));
    record.poses.push_back(p.pose(t, 1, 1e-3));
  }
  try {
    record.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return record;
}

TrajectoryRecord load_trajectory(const std::string& path) {
  auto in = open_input(path);
  return parse_trajectory(in, path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace mcvo
