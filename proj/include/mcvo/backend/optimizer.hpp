#pragma once

#include <set>
#include <vector>

#include "mcvo/backend/state.hpp"
#include "mcvo/parallelism.hpp"

namespace mcvo {

struct OptimizeOptions {
  int max_iterations = 10;
  bool use_huber = true;
  /// Threshold on the Mahalanobis norm, in observation standard deviations.
  double huber_delta = 1.0;
  bool fix_oldest = true;
  bool fix_landmarks = false;
  /// Frames held constant in addition to the oldest one.
  std::set<int> fixed_frames;
  bool use_prior = true;
  double initial_lambda = 1e-4;
  /// Consecutive rejected steps before giving up.
  int max_rejections = 5;
  double gradient_tolerance = 1e-8;
  double relative_cost_tolerance = 1e-12;
  Parallelism parallelism = Parallelism::kOpenMP;
};

struct OptimizeReport {
  /// Cost before the first iteration, then after every accepted step.
  std::vector<double> cost_trace;
  int iterations = 0;
  int accepted = 0;
  bool converged = false;
  /// Stopped after max_rejections consecutive rejected steps.
  bool rejection_limit = false;
};

/// 0.5 * (sum of robustified squared Mahalanobis reprojection errors + squared
/// prior residual).
double window_cost(const SlidingWindowState& state, const OptimizeOptions& options = {});

/// Levenberg-Marquardt over free body poses and inverse depths, landmarks
/// eliminated through the Schur complement. A landmark step that would drive
/// its inverse depth non-positive is replaced by halving the inverse depth.
OptimizeReport optimize_window(SlidingWindowState& state, const OptimizeOptions& options = {});

/// Prior residual and Jacobian at the current state; columns follow
/// prior.frames, six per frame (rotation, translation).
struct PriorLinearization {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
};
PriorLinearization linearize_prior(const MarginalizationPrior& prior,
                                   const SlidingWindowState& state);

/// Removes observations whose squared Mahalanobis error exceeds the
/// threshold, then drops landmarks left with fewer than two observations.
/// Returns the number of observations removed.
int remove_outliers(SlidingWindowState& state, double chi2_threshold = 9.21);

/// Drops observations of unknown landmarks or frames, and landmarks with
/// fewer than two observations (the anchor observation counts).
void prune_landmarks(SlidingWindowState& state);

}  // namespace mcvo
