#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcvo/backend/state.hpp"
#include "mcvo/frontend/descriptor.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/geometry/pose.hpp"
#include "mcvo/loop/vocabulary.hpp"

namespace mcvo {

struct KeyframeFeature {
  int camera = 0;
  LandmarkId landmark = 0;
  Descriptor descriptor{};
  /// Unit ray in the observing camera's frame.
  Eigen::Vector3d ray = Eigen::Vector3d::UnitZ();
  /// Landmark position in this keyframe's body frame, when known.
  std::optional<Eigen::Vector3d> point;
};

/// Synchronized multi-camera keyframe: every camera's features share one bag.
struct KeyframeBundle {
  int id = 0;
  int frame = 0;
  double timestamp = 0.0;
  /// world_T_body at the time the keyframe was created.
  Pose pose;
  std::vector<KeyframeFeature> features;
  BowVector bow;
};

/// World position of the landmark behind (camera, track id), if known.
using WorldPointLookup = std::function<std::optional<Eigen::Vector3d>(int camera, int track)>;

/// Bundle of every descriptor-carrying observation at `frame`; known points
/// are moved into the body frame given by `pose` (world_T_body). The bag is
/// left empty.
KeyframeBundle make_keyframe(int id, int frame, double timestamp, const Pose& pose,
                             const RigConfig& rig, const FeatureTrackTable& tracks,
                             const WorldPointLookup& world_point);

/// Bag over all cameras' descriptors of the bundle.
BowVector bundle_bow(const KeyframeBundle& bundle, const Vocabulary& vocabulary);

struct LoopCandidate {
  int query = 0;
  int match = 0;
  double score = 0.0;
  bool verified = false;
  /// match_T_query (body frames) once verified.
  std::optional<Pose> relative_pose;
  int inliers = 0;
  std::string reason;
};

struct LoopQueryOptions {
  int min_gap_keyframes = 50;
  /// Candidates must score at least this multiple of the query's similarity
  /// to its previous keyframe.
  double relative_score_floor = 0.3;
  int max_candidates = 3;
};

class KeyframeDatabase {
 public:
  /// Keyframe ids must increase; the bag is computed when missing.
  void add(KeyframeBundle bundle, const Vocabulary& vocabulary);
  const std::vector<KeyframeBundle>& keyframes() const { return keyframes_; }
  const KeyframeBundle* find(int id) const;
  bool empty() const { return keyframes_.empty(); }

  /// Keyframes at least min_gap older than the query, scoring at or above
  /// the floor (and above zero), best first (ties: older first).
  std::vector<LoopCandidate> query(const KeyframeBundle& query,
                                   const LoopQueryOptions& options = {}) const;

 private:
  std::vector<KeyframeBundle> keyframes_;
};

}  // namespace mcvo
