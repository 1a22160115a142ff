#pragma once

#include "mcvo/frontend/feature_selection.hpp"
#include "mcvo/frontend/track_table.hpp"
#include "mcvo/geometry/camera.hpp"
#include "mcvo/parallelism.hpp"

namespace mcvo {

/// Replays raw tracks frame by frame and keeps at most
/// options.target_count live tracks per camera. Admitted tracks stay while
/// they are observed; free slots are filled from the remaining observations
/// by three-priority selection with a per-track pseudo-random score. A track
/// that drops out can be admitted again later.
FeatureTrackTable admit_tracks(const FeatureTrackTable& raw, const RigConfig& rig,
                               const SelectionOptions& options = {},
                               Parallelism parallelism = Parallelism::kOpenMP);

}  // namespace mcvo
