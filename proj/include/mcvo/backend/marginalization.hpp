#pragma once

#include <string>
#include <vector>

#include "mcvo/backend/optimizer.hpp"
#include "mcvo/backend/state.hpp"

namespace mcvo {

enum class KeyframeDecision { kMarginalizeOldest, kDiscardSecondNewest };

std::string to_string(KeyframeDecision decision);

struct KeyframePolicy {
  double parallax_threshold = 10.0;
  double tracked_ratio_threshold = 0.5;
};

/// Marginalize the oldest frame when the newest frame moved enough relative
/// to the second newest (mean parallax, px) or lost too many tracks.
KeyframeDecision keyframe_decision(double parallax, double tracked_ratio,
                                   const KeyframePolicy& policy = {});

struct MarginalizationOptions {
  /// Eigenvalue floor of the pseudo-inverse of the removed block.
  double eigenvalue_floor = 1e-10;
  /// Eigenvalues of the resulting information matrix below this are dropped
  /// when factoring it into J and r0.
  double prior_eigenvalue_floor = 1e-8;
  bool use_huber = true;
  double huber_delta = 1.0;
};

struct MarginalizationReport {
  int removed_frame = -1;
  int removed_landmarks = 0;
  int reanchored_landmarks = 0;
  int prior_dimension = 0;
  std::vector<std::string> diagnostics;
};

/// Schur complement of the oldest pose and the landmarks anchored at it,
/// together with the previous prior, onto the remaining poses they touch.
/// The new prior is linearized at the current estimates and keeps those
/// linearization points. Landmarks anchored at the removed frame are then
/// re-anchored at their next observation (dropped when fewer than two
/// observations remain).
MarginalizationReport marginalize_oldest(SlidingWindowState& state,
                                         const MarginalizationOptions& options = {});

/// Removes the second-newest frame and its observations without adding
/// information to the prior; the frame is eliminated from an existing prior.
void discard_second_newest(SlidingWindowState& state,
                           const MarginalizationOptions& options = {});

/// Builds a prior from an information matrix and vector over `frames`.
MarginalizationPrior make_prior(const std::vector<int>& frames, const std::vector<Pose>& linearization,
                                const Eigen::MatrixXd& information,
                                const Eigen::VectorXd& information_vector,
                                double eigenvalue_floor = 1e-8);

}  // namespace mcvo
