#include "mcvo/loop/keyframe_database.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcvo {

KeyframeBundle make_keyframe(int id, int frame, double timestamp, const Pose& pose,
                             const RigConfig& rig, const FeatureTrackTable& tracks,
                             const WorldPointLookup& world_point) {
  KeyframeBundle bundle;
  bundle.id = id;
  bundle.frame = frame;
  bundle.timestamp = timestamp;
  bundle.pose = pose;
  const Pose body_T_world = inverse(pose);
  for (int c = 0; c < rig.size(); ++c) {
    for (const auto& [track, point] : tracks.observations_at(c, frame)) {
      if (!point.descriptor) continue;
      const auto ray = unproject(point.pixel, rig.cameras[c].intrinsic);
      if (!ray) continue;
      KeyframeFeature f;
      f.camera = c;
      f.landmark = make_landmark_id(c, track);
      f.descriptor = *point.descriptor;
      f.ray = *ray;
      if (world_point) {
        if (auto X = world_point(c, track)) f.point = body_T_world * *X;
      }
      bundle.features.push_back(f);
    }
  }
  return bundle;
}

BowVector bundle_bow(const KeyframeBundle& bundle, const Vocabulary& vocabulary) {
  std::vector<Descriptor> descriptors;
  descriptors.reserve(bundle.features.size());
  for (const auto& f : bundle.features) descriptors.push_back(f.descriptor);
  return bow_vector(descriptors, vocabulary);
}

void KeyframeDatabase::add(KeyframeBundle bundle, const Vocabulary& vocabulary) {
  if (!keyframes_.empty() && bundle.id <= keyframes_.back().id) {
    throw std::invalid_argument("keyframe ids must increase");
  }
  if (bundle.bow.empty()) bundle.bow = bundle_bow(bundle, vocabulary);
  keyframes_.push_back(std::move(bundle));
}

const KeyframeBundle* KeyframeDatabase::find(int id) const {
  const auto it = std::lower_bound(keyframes_.begin(), keyframes_.end(), id,
                                   [](const KeyframeBundle& k, int v) { return k.id < v; });
  return it != keyframes_.end() && it->id == id ? &*it : nullptr;
}

std::vector<LoopCandidate> KeyframeDatabase::query(const KeyframeBundle& query,
                                                   const LoopQueryOptions& options) const {
  std::vector<LoopCandidate> out;
  double reference = 0.0;
  for (auto it = keyframes_.rbegin(); it != keyframes_.rend(); ++it) {
    if (it->id < query.id) {
      reference = bow_similarity(query.bow, it->bow);
      break;
    }
  }
  const double floor = options.relative_score_floor * reference;
  for (const auto& kf : keyframes_) {
    if (kf.id > query.id - options.min_gap_keyframes) break;
    const double score = bow_similarity(query.bow, kf.bow);
    if (score <= 0.0 || score < floor) continue;
    LoopCandidate c;
    c.query = query.id;
    c.match = kf.id;
    c.score = score;
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LoopCandidate& a, const LoopCandidate& b) { return a.score > b.score; });
  if (static_cast<int>(out.size()) > options.max_candidates) out.resize(options.max_candidates);
  return out;
}

}  // namespace mcvo
