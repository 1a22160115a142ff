#include "mcvo/frontend/admission.hpp"

#include <cstdint>
#include <set>
#include <tuple>

namespace mcvo {

namespace {

double track_score(int camera, int track) {
  std::uint64_t z = (static_cast<std::uint64_t>(camera) << 32) ^ static_cast<std::uint32_t>(track);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

using Admitted = std::vector<std::tuple<int, int, TrackPoint>>;

Admitted admit_camera(const FeatureTrackTable& raw, const CameraIntrinsic& intrinsic, int camera,
                      const SelectionOptions& options) {
  Admitted out;
  const ImageRect bounds{0.0, 0.0, static_cast<double>(intrinsic.width),
                         static_cast<double>(intrinsic.height)};
  std::set<int> live;
  for (int f = raw.first_frame(); f <= raw.last_frame() && f >= 0; ++f) {
    const auto obs = raw.observations_at(camera, f);
    std::set<int> next;
    std::vector<TrackedFeature> tracked;
    std::vector<FeatureCandidate> candidates;
    std::vector<int> candidate_index;
    for (int i = 0; i < static_cast<int>(obs.size()); ++i) {
      const auto& [id, point] = obs[i];
      if (live.count(id)) {
        tracked.push_back({id, point.pixel, 1});
        next.insert(id);
        out.emplace_back(f, id, point);
      } else {
        candidates.push_back({point.pixel, track_score(camera, id)});
        candidate_index.push_back(i);
      }
    }
    const int free = options.target_count - static_cast<int>(tracked.size());
    if (free > 0 && !candidates.empty()) {
      SelectionOptions o = options;
      o.target_count = free;
      for (int k : select_features_3priority(tracked, candidates, bounds, o)) {
        const auto& [id, point] = obs[candidate_index[k]];
        next.insert(id);
        out.emplace_back(f, id, point);
      }
    }
    live = std::move(next);
  }
  return out;
}

}  // namespace

FeatureTrackTable admit_tracks(const FeatureTrackTable& raw, const RigConfig& rig,
                               const SelectionOptions& options, Parallelism parallelism) {
  const int n = raw.num_cameras();
  std::vector<Admitted> per_camera(n);
  if (parallelism == Parallelism::kOpenMP) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < n; ++c) per_camera[c] = admit_camera(raw, rig.cameras[c].intrinsic, c, options);
  } else {
    for (int c = 0; c < n; ++c) per_camera[c] = admit_camera(raw, rig.cameras[c].intrinsic, c, options);
  }
  FeatureTrackTable table(n);
  for (int c = 0; c < n; ++c) {
    for (const auto& [frame, id, point] : per_camera[c]) table.append(c, id, point);
  }
  if (raw.last_frame() >= 0) table.set_last_frame(raw.last_frame());
  return table;
}

}  // namespace mcvo
