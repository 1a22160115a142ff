#include "mcvo/frontend/track_table.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace mcvo {

namespace {

const TrackPoint* point_at(const Track& track, int frame) {
  auto it = std::lower_bound(track.begin(), track.end(), frame,
                             [](const TrackPoint& p, int f) { return p.frame < f; });
  if (it == track.end() || it->frame != frame) return nullptr;
  return &*it;
}

}  // namespace

const Track* FeatureTrackTable::find(int camera, int track_id) const {
  const auto& m = tracks_.at(camera);
  auto it = m.find(track_id);
  return it == m.end() ? nullptr : &it->second;
}

bool FeatureTrackTable::append(int camera, int track_id, const TrackPoint& point) {
  auto& track = tracks_.at(camera)[track_id];
  if (!track.empty() && track.back().frame >= point.frame) return false;
  track.push_back(point);
  if (first_frame_ < 0 || point.frame < first_frame_) first_frame_ = point.frame;
  last_frame_ = std::max(last_frame_, point.frame);
  return true;
}

void FeatureTrackTable::set_last_frame(int frame) {
  if (first_frame_ < 0) first_frame_ = frame;
  last_frame_ = std::max(last_frame_, frame);
}

std::vector<std::pair<int, TrackPoint>> FeatureTrackTable::observations_at(
    int camera, int frame) const {
  std::vector<std::pair<int, TrackPoint>> out;
  for (const auto& [id, track] : tracks_.at(camera)) {
    if (track.empty() || track.front().frame > frame || track.back().frame < frame) {
      continue;
    }
    if (const TrackPoint* p = point_at(track, frame)) out.emplace_back(id, *p);
  }
  return out;
}

bool FeatureTrackTable::empty() const { return observation_count() == 0; }

std::size_t FeatureTrackTable::observation_count() const {
  std::size_t n = 0;
  for (const auto& cam : tracks_) {
    for (const auto& [id, track] : cam) n += track.size();
  }
  return n;
}

bool FeatureTrackTable::operator==(const FeatureTrackTable& other) const {
  if (tracks_.size() != other.tracks_.size()) return false;
  for (std::size_t c = 0; c < tracks_.size(); ++c) {
    const auto& a = tracks_[c];
    const auto& b = other.tracks_[c];
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.size() != ib->second.size()) return false;
      for (std::size_t k = 0; k < ia->second.size(); ++k) {
        const TrackPoint& pa = ia->second[k];
        const TrackPoint& pb = ib->second[k];
        if (pa.frame != pb.frame || pa.pixel != pb.pixel ||
            pa.descriptor != pb.descriptor) {
          return false;
        }
      }
    }
  }
  return true;
}

TrackUpdate update_track_table(
    FeatureTrackTable& table, int frame_index,
    const std::vector<std::vector<FrameObservation>>& per_camera) {
  if (table.last_frame() >= 0 && frame_index != table.last_frame() + 1) {
    throw std::invalid_argument("track table expects frame " +
                                std::to_string(table.last_frame() + 1) + ", got " +
                                std::to_string(frame_index));
  }
  if (static_cast<int>(per_camera.size()) > table.num_cameras()) {
    table.resize(static_cast<int>(per_camera.size()));
  }

  TrackUpdate update;
  update.mean_parallax.assign(table.num_cameras(), 0.0);
  for (int cam = 0; cam < static_cast<int>(per_camera.size()); ++cam) {
    std::set<int> seen;
    double sum = 0.0;
    int count = 0;
    for (const auto& obs : per_camera[cam]) {
      if (!seen.insert(obs.track_id).second) {
        update.diagnostics.push_back("camera " + std::to_string(cam) + " frame " +
                                     std::to_string(frame_index) + ": duplicate track id " +
                                     std::to_string(obs.track_id) + " rejected");
        continue;
      }
      if (const Track* prev = table.find(cam, obs.track_id);
          prev && !prev->empty() && prev->back().frame == frame_index - 1) {
        sum += (obs.pixel - prev->back().pixel).norm();
        ++count;
      }
      table.append(cam, obs.track_id, TrackPoint{frame_index, obs.pixel, obs.descriptor});
    }
    update.mean_parallax[cam] = count > 0 ? sum / count : 0.0;
  }
  table.set_last_frame(frame_index);
  return update;
}

double window_parallax(const FeatureTrackTable& table, int camera, int first,
                       int last) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [id, track] : table.tracks(camera)) {
    if (track.empty() || track.front().frame > first || track.back().frame < last) {
      continue;
    }
    const TrackPoint* a = point_at(track, first);
    const TrackPoint* b = point_at(track, last);
    if (a && b) {
      sum += (b->pixel - a->pixel).norm();
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

double track_stability(const FeatureTrackTable& table, int camera, int first,
                       int last) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [id, track] : table.tracks(camera)) {
    int inside = 0;
    for (const auto& p : track) {
      if (p.frame >= first && p.frame <= last) ++inside;
    }
    if (inside > 0) {
      sum += inside;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace mcvo
