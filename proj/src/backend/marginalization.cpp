#include "mcvo/backend/marginalization.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "mcvo/backend/residual.hpp"

namespace mcvo {

std::string to_string(KeyframeDecision decision) {
  return decision == KeyframeDecision::kMarginalizeOldest ? "marginalize_oldest"
                                                          : "discard_second_newest";
}

KeyframeDecision keyframe_decision(double parallax, double tracked_ratio,
                                   const KeyframePolicy& policy) {
  if (parallax > policy.parallax_threshold || tracked_ratio < policy.tracked_ratio_threshold) {
    return KeyframeDecision::kMarginalizeOldest;
  }
  return KeyframeDecision::kDiscardSecondNewest;
}

MarginalizationPrior make_prior(const std::vector<int>& frames, const std::vector<Pose>& linearization,
                                const Eigen::MatrixXd& information,
                                const Eigen::VectorXd& information_vector,
                                double eigenvalue_floor) {
  MarginalizationPrior prior;
  if (frames.empty()) return prior;
  prior.frames = frames;
  prior.linearization = linearization;
  prior.information = 0.5 * (information + information.transpose());
  prior.information_vector = information_vector;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(prior.information);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  Eigen::VectorXd sqrt_s(lambda.size()), inv_sqrt_s(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const bool keep = lambda(i) > eigenvalue_floor;
    sqrt_s(i) = keep ? std::sqrt(lambda(i)) : 0.0;
    inv_sqrt_s(i) = keep ? 1.0 / std::sqrt(lambda(i)) : 0.0;
  }
  prior.J = sqrt_s.asDiagonal() * eig.eigenvectors().transpose();
  prior.r0 = inv_sqrt_s.asDiagonal() * (eig.eigenvectors().transpose() * information_vector);
  // keep the stored information consistent with the factor actually used
  prior.information = prior.J.transpose() * prior.J;
  prior.information = 0.5 * (prior.information + prior.information.transpose()).eval();
  prior.information_vector = prior.J.transpose() * prior.r0;
  return prior;
}

namespace {

/// Pseudo-inverse of a symmetric block with an eigenvalue floor; returns
/// whether any eigenvalue was floored.
bool floored_inverse(const Eigen::MatrixXd& A, double floor, Eigen::MatrixXd& inv) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
  Eigen::VectorXd d = eig.eigenvalues();
  bool floored = false;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) > floor) {
      d(i) = 1.0 / d(i);
    } else {
      d(i) = 0.0;
      floored = true;
    }
  }
  inv = eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
  return floored;
}

/// Eliminates the first `removed` rows/columns of (H, b).
void schur_out(const Eigen::MatrixXd& H, const Eigen::VectorXd& b, int removed, double floor,
               Eigen::MatrixXd& Hm, Eigen::VectorXd& bm, bool& floored) {
  const int kept = static_cast<int>(H.rows()) - removed;
  Eigen::MatrixXd inv;
  floored = floored_inverse(H.topLeftCorner(removed, removed), floor, inv);
  const Eigen::MatrixXd Hkr = H.bottomLeftCorner(kept, removed);
  Hm = H.bottomRightCorner(kept, kept) - Hkr * inv * Hkr.transpose();
  bm = b.tail(kept) - Hkr * inv * b.head(removed);
}

double huber_weight(double e2, const MarginalizationOptions& options) {
  if (!options.use_huber || e2 <= options.huber_delta * options.huber_delta) return 1.0;
  return options.huber_delta / std::sqrt(e2);
}

/// Re-anchors a landmark at its earliest observation in `frames_after`, with
/// the anchor ray taken from that observation.
bool reanchor(SlidingWindowState& state, LandmarkState& lm, const Eigen::Vector3d& world_point,
              int removed_frame) {
  const ReprojObservation* first = nullptr;
  int count = 0;
  for (const auto& obs : state.observations) {
    if (obs.landmark != lm.id || obs.frame == removed_frame) continue;
    if (state.frame_slot(obs.frame) < 0) continue;
    ++count;
    if (first == nullptr || obs.frame < first->frame) first = &obs;
  }
  if (count < 2) return false;
  const FrameState* anchor = state.find_frame(first->frame);
  const Eigen::Vector3d pc =
      inverse(anchor->pose * state.extrinsics[lm.camera].cam_in_body) * world_point;
  if (!(pc.z() > kMinProjectionDepth)) return false;
  lm.anchor_frame = first->frame;
  lm.anchor_ray = Eigen::Vector3d(first->normalized.x(), first->normalized.y(), 1.0);
  lm.inverse_depth = 1.0 / pc.z();
  return true;
}

}  // namespace

MarginalizationReport marginalize_oldest(SlidingWindowState& state,
                                         const MarginalizationOptions& options) {
  MarginalizationReport report;
  if (state.frames.empty()) return report;
  const int f0 = state.frames.front().frame;
  report.removed_frame = f0;

  // variables: removed pose first, then every retained pose touched by a factor
  std::vector<int> kept_frames;
  auto add_kept = [&](int frame) {
    if (frame != f0 && std::find(kept_frames.begin(), kept_frames.end(), frame) == kept_frames.end()) {
      kept_frames.push_back(frame);
    }
  };
  std::map<LandmarkId, int> removed_lms;
  for (const auto& [id, lm] : state.landmarks) {
    if (lm.anchor_frame == f0) removed_lms.emplace(id, 0);
  }
  const std::vector<ResidualBlock> blocks = evaluate_residuals(state);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& obs = state.observations[i];
    if (!removed_lms.count(obs.landmark) || obs.frame == f0 || !blocks[i].valid) continue;
    add_kept(obs.frame);
  }
  for (int f : state.prior.frames) add_kept(f);
  std::sort(kept_frames.begin(), kept_frames.end(), [&](int a, int b) {
    return state.frame_slot(a) < state.frame_slot(b);
  });

  std::map<int, int> index;  // frame -> variable block
  index[f0] = 0;
  for (std::size_t k = 0; k < kept_frames.size(); ++k) index[kept_frames[k]] = static_cast<int>(k) + 1;
  const int n = 6 * static_cast<int>(kept_frames.size() + 1);

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  int next = 0;
  for (auto& [id, l] : removed_lms) l = next++;
  std::vector<double> hll(next, 0.0), gl(next, 0.0);
  std::vector<Eigen::VectorXd> hpl(next, Eigen::VectorXd::Zero(n));

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& obs = state.observations[i];
    const auto it = removed_lms.find(obs.landmark);
    if (it == removed_lms.end() || obs.frame == f0 || !blocks[i].valid) continue;
    const ResidualBlock& blk = blocks[i];
    Eigen::Matrix2d info = obs.covariance.inverse();
    info *= huber_weight(blk.r.dot(info * blk.r), options);
    const int a = 6 * index.at(f0);
    const int t = 6 * index.at(obs.frame);
    const Eigen::Matrix<double, 6, 2> JaT = blk.J_anchor.transpose() * info;
    const Eigen::Matrix<double, 6, 2> JtT = blk.J_target.transpose() * info;
    H.block<6, 6>(a, a) += JaT * blk.J_anchor;
    H.block<6, 6>(t, t) += JtT * blk.J_target;
    H.block<6, 6>(a, t) += JaT * blk.J_target;
    H.block<6, 6>(t, a) += (JaT * blk.J_target).transpose();
    b.segment<6>(a) += JaT * blk.r;
    b.segment<6>(t) += JtT * blk.r;
    const int l = it->second;
    hll[l] += blk.J_inverse_depth.dot(info * blk.J_inverse_depth);
    gl[l] += blk.J_inverse_depth.dot(info * blk.r);
    hpl[l].segment<6>(a) += JaT * blk.J_inverse_depth;
    hpl[l].segment<6>(t) += JtT * blk.J_inverse_depth;
  }
  int floored_landmarks = 0;
  for (int l = 0; l < next; ++l) {
    if (!(hll[l] > options.eigenvalue_floor)) {
      ++floored_landmarks;
      continue;
    }
    H.noalias() -= hpl[l] * (hpl[l].transpose() / hll[l]);
    b -= hpl[l] * (gl[l] / hll[l]);
  }
  if (floored_landmarks > 0) {
    report.diagnostics.push_back(std::to_string(floored_landmarks) +
                                 " landmark blocks below the eigenvalue floor");
  }

  if (!state.prior.empty()) {
    const PriorLinearization lin = linearize_prior(state.prior, state);
    for (std::size_t i = 0; i < state.prior.frames.size(); ++i) {
      const int bi = 6 * index.at(state.prior.frames[i]);
      b.segment<6>(bi) += lin.J.middleCols<6>(6 * i).transpose() * lin.r;
      for (std::size_t j = 0; j < state.prior.frames.size(); ++j) {
        const int bj = 6 * index.at(state.prior.frames[j]);
        H.block<6, 6>(bi, bj) += lin.J.middleCols<6>(6 * i).transpose() * lin.J.middleCols<6>(6 * j);
      }
    }
  }

  MarginalizationPrior prior;
  if (!kept_frames.empty()) {
    Eigen::MatrixXd Hm;
    Eigen::VectorXd bm;
    bool floored = false;
    schur_out(H, b, 6, options.eigenvalue_floor, Hm, bm, floored);
    if (floored) report.diagnostics.push_back("removed pose block singular; pseudo-inverse floored");
    std::vector<Pose> lin;
    for (int f : kept_frames) lin.push_back(state.find_frame(f)->pose);
    prior = make_prior(kept_frames, lin, Hm, bm, options.prior_eigenvalue_floor);
  }

  std::map<LandmarkId, Eigen::Vector3d> world_points;
  for (const auto& [id, l] : removed_lms) {
    world_points[id] = landmark_world_point(state, state.landmarks.at(id));
  }
  state.prior = std::move(prior);
  for (const auto& [id, p] : world_points) {
    LandmarkState& lm = state.landmarks.at(id);
    if (reanchor(state, lm, p, f0)) {
      ++report.reanchored_landmarks;
    } else {
      state.landmarks.erase(id);
      ++report.removed_landmarks;
    }
  }
  state.frames.erase(state.frames.begin());
  prune_landmarks(state);
  report.prior_dimension = state.prior.dimension();
  for (const auto& d : report.diagnostics) state.diagnostics.push_back(d);
  return report;
}

void discard_second_newest(SlidingWindowState& state, const MarginalizationOptions& options) {
  if (state.frames.size() < 2) return;
  const int slot = static_cast<int>(state.frames.size()) - 2;
  const int frame = state.frames[slot].frame;

  const auto pos = std::find(state.prior.frames.begin(), state.prior.frames.end(), frame);
  if (pos != state.prior.frames.end()) {
    const int k = static_cast<int>(pos - state.prior.frames.begin());
    const int n = state.prior.dimension();
    Eigen::MatrixXd H = state.prior.J.transpose() * state.prior.J;
    Eigen::VectorXd b = state.prior.J.transpose() * state.prior.r0;
    // move the discarded block to the front
    Eigen::VectorXi perm(n);
    int w = 0;
    for (int i = 0; i < 6; ++i) perm(w++) = 6 * k + i;
    for (int i = 0; i < n; ++i) {
      if (i / 6 != k) perm(w++) = i;
    }
    Eigen::MatrixXd Hp(n, n);
    Eigen::VectorXd bp(n);
    for (int i = 0; i < n; ++i) {
      bp(i) = b(perm(i));
      for (int j = 0; j < n; ++j) Hp(i, j) = H(perm(i), perm(j));
    }
    std::vector<int> frames;
    std::vector<Pose> lin;
    for (std::size_t i = 0; i < state.prior.frames.size(); ++i) {
      if (static_cast<int>(i) == k) continue;
      frames.push_back(state.prior.frames[i]);
      lin.push_back(state.prior.linearization[i]);
    }
    if (frames.empty()) {
      state.prior = MarginalizationPrior{};
    } else {
      Eigen::MatrixXd Hm;
      Eigen::VectorXd bm;
      bool floored = false;
      schur_out(Hp, bp, 6, options.eigenvalue_floor, Hm, bm, floored);
      state.prior = make_prior(frames, lin, Hm, bm, options.prior_eigenvalue_floor);
    }
  }

  std::erase_if(state.observations, [&](const ReprojObservation& o) { return o.frame == frame; });
  state.frames.erase(state.frames.begin() + slot);
  prune_landmarks(state);
}

}  // namespace mcvo
