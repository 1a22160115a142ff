#include "mcvo/backend/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>

#include "mcvo/backend/residual.hpp"

namespace mcvo {

namespace {

struct Robust {
  double rho = 0.0;  // robustified squared error
  double weight = 1.0;
};

Robust robustify(double e2, const OptimizeOptions& options) {
  if (!options.use_huber) return {e2, 1.0};
  const double d = options.huber_delta;
  if (e2 <= d * d) return {e2, 1.0};
  const double e = std::sqrt(e2);
  return {2.0 * d * e - d * d, d / e};
}

double reprojection_cost(const SlidingWindowState& state,
                         const std::vector<ResidualBlock>& blocks,
                         const OptimizeOptions& options) {
  double cost = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ResidualBlock& b = blocks[i];
    if (!b.valid || b.anchor_slot == b.target_slot) continue;
    const Eigen::Matrix2d info = state.observations[i].covariance.inverse();
    cost += robustify(b.r.dot(info * b.r), options).rho;
  }
  return 0.5 * cost;
}

double prior_cost(const SlidingWindowState& state, const OptimizeOptions& options) {
  if (!options.use_prior || state.prior.empty()) return 0.0;
  return 0.5 * linearize_prior(state.prior, state).r.squaredNorm();
}

struct Problem {
  std::vector<int> pose_var;        // slot -> variable index or -1
  int num_pose_vars = 0;
  std::map<LandmarkId, int> lm_var;  // landmark -> index
  std::vector<LandmarkId> lm_ids;
};

Problem index_problem(const SlidingWindowState& state, const OptimizeOptions& options) {
  Problem p;
  p.pose_var.assign(state.frames.size(), -1);
  for (std::size_t s = 0; s < state.frames.size(); ++s) {
    if (options.fix_oldest && s == 0) continue;
    if (options.fixed_frames.count(state.frames[s].frame)) continue;
    p.pose_var[s] = p.num_pose_vars++;
  }
  if (!options.fix_landmarks) {
    for (const auto& [id, lm] : state.landmarks) {
      p.lm_var[id] = static_cast<int>(p.lm_ids.size());
      p.lm_ids.push_back(id);
    }
  }
  return p;
}

struct NormalEquations {
  Eigen::MatrixXd Hpp;
  Eigen::VectorXd gp;
  std::vector<double> hll;
  std::vector<double> gl;
  /// Landmark-pose coupling, one dense row of length 6 * poses per landmark.
  std::vector<Eigen::VectorXd> hpl;
};

NormalEquations build_normal_equations(const SlidingWindowState& state,
                                       const std::vector<ResidualBlock>& blocks,
                                       const Problem& p, const OptimizeOptions& options) {
  const int np = 6 * p.num_pose_vars;
  NormalEquations ne;
  ne.Hpp = Eigen::MatrixXd::Zero(np, np);
  ne.gp = Eigen::VectorXd::Zero(np);
  ne.hll.assign(p.lm_ids.size(), 0.0);
  ne.gl.assign(p.lm_ids.size(), 0.0);
  ne.hpl.assign(p.lm_ids.size(), Eigen::VectorXd::Zero(np));

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ResidualBlock& b = blocks[i];
    if (!b.valid || b.anchor_slot == b.target_slot) continue;
    const ReprojObservation& obs = state.observations[i];
    Eigen::Matrix2d info = obs.covariance.inverse();
    info *= robustify(b.r.dot(info * b.r), options).weight;

    const int va = p.pose_var[b.anchor_slot];
    const int vb = p.pose_var[b.target_slot];
    const Eigen::Matrix<double, 6, 2> JaT = b.J_anchor.transpose() * info;
    const Eigen::Matrix<double, 6, 2> JbT = b.J_target.transpose() * info;
    if (va >= 0) {
      ne.Hpp.block<6, 6>(6 * va, 6 * va) += JaT * b.J_anchor;
      ne.gp.segment<6>(6 * va) += JaT * b.r;
    }
    if (vb >= 0) {
      ne.Hpp.block<6, 6>(6 * vb, 6 * vb) += JbT * b.J_target;
      ne.gp.segment<6>(6 * vb) += JbT * b.r;
    }
    if (va >= 0 && vb >= 0) {
      const Eigen::Matrix<double, 6, 6> Hab = JaT * b.J_target;
      ne.Hpp.block<6, 6>(6 * va, 6 * vb) += Hab;
      ne.Hpp.block<6, 6>(6 * vb, 6 * va) += Hab.transpose();
    }
    const auto it = p.lm_var.find(obs.landmark);
    if (it == p.lm_var.end()) continue;
    const int l = it->second;
    const Eigen::Vector2d Jl = b.J_inverse_depth;
    ne.hll[l] += Jl.dot(info * Jl);
    ne.gl[l] += Jl.dot(info * b.r);
    if (va >= 0) ne.hpl[l].segment<6>(6 * va) += JaT * Jl;
    if (vb >= 0) ne.hpl[l].segment<6>(6 * vb) += JbT * Jl;
  }

  if (options.use_prior && !state.prior.empty()) {
    const PriorLinearization lin = linearize_prior(state.prior, state);
    for (std::size_t i = 0; i < state.prior.frames.size(); ++i) {
      const int si = state.frame_slot(state.prior.frames[i]);
      const int vi = si >= 0 ? p.pose_var[si] : -1;
      if (vi < 0) continue;
      const auto Ji = lin.J.middleCols<6>(6 * i);
      ne.gp.segment<6>(6 * vi) += Ji.transpose() * lin.r;
      for (std::size_t j = 0; j < state.prior.frames.size(); ++j) {
        const int sj = state.frame_slot(state.prior.frames[j]);
        const int vj = sj >= 0 ? p.pose_var[sj] : -1;
        if (vj < 0) continue;
        ne.Hpp.block<6, 6>(6 * vi, 6 * vj) += Ji.transpose() * lin.J.middleCols<6>(6 * j);
      }
    }
  }
  return ne;
}

void apply_step(SlidingWindowState& state, const Problem& p, const Eigen::VectorXd& dp,
                const Eigen::VectorXd& dl) {
  for (std::size_t s = 0; s < state.frames.size(); ++s) {
    const int v = p.pose_var[s];
    if (v < 0) continue;
    Pose& pose = state.frames[s].pose;
    pose.rotation = (pose.rotation * so3_exp(dp.segment<3>(6 * v))).normalized();
    pose.translation += dp.segment<3>(6 * v + 3);
  }
  for (std::size_t l = 0; l < p.lm_ids.size(); ++l) {
    state.landmarks.at(p.lm_ids[l]).inverse_depth += dl(l);
  }
}

double clamp_diag(double v) { return std::clamp(v, 1e-6, 1e32); }

}  // namespace

PriorLinearization linearize_prior(const MarginalizationPrior& prior,
                                   const SlidingWindowState& state) {
  const int n = prior.dimension();
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 0; i < prior.frames.size(); ++i) {
    const FrameState* f = state.find_frame(prior.frames[i]);
    if (f == nullptr) continue;
    const Pose& lin = prior.linearization[i];
    const Eigen::Vector3d phi = so3_log(lin.rotation.conjugate() * f->pose.rotation);
    dx.segment<3>(6 * i) = phi;
    dx.segment<3>(6 * i + 3) = f->pose.translation - lin.translation;
    D.block<3, 3>(6 * i, 6 * i) = so3_right_jacobian_inverse(phi);
  }
  PriorLinearization out;
  out.r = prior.r0 + prior.J * dx;
  out.J = prior.J * D;
  return out;
}

double window_cost(const SlidingWindowState& state, const OptimizeOptions& options) {
  return reprojection_cost(state, evaluate_residuals(state, options.parallelism), options) +
         prior_cost(state, options);
}

OptimizeReport optimize_window(SlidingWindowState& state, const OptimizeOptions& options) {
  OptimizeReport report;
  const Problem p = index_problem(state, options);
  const int np = 6 * p.num_pose_vars;
  const int nl = static_cast<int>(p.lm_ids.size());

  std::vector<ResidualBlock> blocks = evaluate_residuals(state, options.parallelism);
  double cost = reprojection_cost(state, blocks, options) + prior_cost(state, options);
  report.cost_trace.push_back(cost);
  if (np == 0 && nl == 0) {
    report.converged = true;
    return report;
  }

  double mu = options.initial_lambda;
  double nu = 2.0;
  int rejections = 0;
  bool relinearize = true;
  NormalEquations ne;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    ++report.iterations;
    if (relinearize) {
      ne = build_normal_equations(state, blocks, p, options);
      relinearize = false;
    }
    double gmax = np > 0 ? ne.gp.cwiseAbs().maxCoeff() : 0.0;
    for (double g : ne.gl) gmax = std::max(gmax, std::abs(g));
    if (gmax < options.gradient_tolerance) {
      report.converged = true;
      break;
    }

    // damped reduced system
    Eigen::VectorXd Dp(np);
    for (int i = 0; i < np; ++i) Dp(i) = clamp_diag(ne.Hpp(i, i));
    Eigen::MatrixXd S = ne.Hpp;
    S.diagonal() += mu * Dp;
    Eigen::VectorXd rhs = -ne.gp;
    std::vector<double> hll_d(nl), Dl(nl);
    for (int l = 0; l < nl; ++l) {
      Dl[l] = clamp_diag(ne.hll[l]);
      hll_d[l] = ne.hll[l] + mu * Dl[l];
      if (np > 0) {
        S.noalias() -= ne.hpl[l] * (ne.hpl[l].transpose() / hll_d[l]);
        rhs += ne.hpl[l] * (ne.gl[l] / hll_d[l]);
      }
    }
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(np);
    if (np > 0) dp = S.ldlt().solve(rhs);
    Eigen::VectorXd dl(nl);
    for (int l = 0; l < nl; ++l) {
      const double coupling = np > 0 ? ne.hpl[l].dot(dp) : 0.0;
      dl(l) = (-ne.gl[l] - coupling) / hll_d[l];
    }

    // a landmark whose step would cross zero inverse depth only halves it
    const bool feasible = dp.allFinite() && dl.allFinite();
    for (int l = 0; l < nl && feasible; ++l) {
      const double lambda = state.landmarks.at(p.lm_ids[l]).inverse_depth;
      if (!(lambda + dl(l) > 0.0)) dl(l) = -0.5 * lambda;
    }

    // reduction predicted by the undamped quadratic model
    double predicted = 0.0;
    if (feasible) {
      double quad = np > 0 ? dp.dot(ne.Hpp * dp) : 0.0;
      double lin = np > 0 ? ne.gp.dot(dp) : 0.0;
      for (int l = 0; l < nl; ++l) {
        quad += ne.hll[l] * dl(l) * dl(l) + (np > 0 ? 2.0 * dl(l) * ne.hpl[l].dot(dp) : 0.0);
        lin += ne.gl[l] * dl(l);
      }
      predicted = -(lin + 0.5 * quad);
    }
    const double step_norm = std::sqrt(dp.squaredNorm() + dl.squaredNorm());

    bool accepted = false;
    if (feasible) {
      SlidingWindowState trial = state;
      apply_step(trial, p, dp, dl);
      std::vector<ResidualBlock> trial_blocks = evaluate_residuals(trial, options.parallelism);
      const double trial_cost =
          reprojection_cost(trial, trial_blocks, options) + prior_cost(trial, options);
      if (trial_cost < cost && predicted > 0.0) {
        const double rho = (cost - trial_cost) / predicted;
        const double decrease = cost - trial_cost;
        state = std::move(trial);
        blocks = std::move(trial_blocks);
        cost = trial_cost;
        report.cost_trace.push_back(cost);
        ++report.accepted;
        accepted = true;
        relinearize = true;
        rejections = 0;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        if (decrease <= options.relative_cost_tolerance * std::max(cost, 1e-300) ||
            step_norm < 1e-14) {
          report.converged = true;
          break;
        }
      }
    }
    if (!accepted) {
      ++rejections;
      mu *= nu;
      nu *= 2.0;
      if (rejections >= options.max_rejections) {
        report.rejection_limit = true;
        report.converged = true;
        break;
      }
    }
  }
  return report;
}

int remove_outliers(SlidingWindowState& state, double chi2_threshold) {
  const auto blocks = evaluate_residuals(state);
  std::vector<ReprojObservation> kept;
  kept.reserve(state.observations.size());
  int removed = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const auto& obs = state.observations[i];
    bool bad = !b.valid;
    if (b.valid && b.anchor_slot != b.target_slot) {
      bad = b.r.dot(obs.covariance.inverse() * b.r) > chi2_threshold;
    }
    if (bad && b.anchor_slot >= 0 && b.anchor_slot == b.target_slot) bad = false;
    if (bad) {
      ++removed;
    } else {
      kept.push_back(obs);
    }
  }
  state.observations = std::move(kept);
  prune_landmarks(state);
  return removed;
}

void prune_landmarks(SlidingWindowState& state) {
  std::map<LandmarkId, int> counts;
  std::map<LandmarkId, bool> has_anchor;
  for (const auto& obs : state.observations) {
    const auto it = state.landmarks.find(obs.landmark);
    if (it == state.landmarks.end() || state.frame_slot(obs.frame) < 0) continue;
    ++counts[obs.landmark];
    if (obs.frame == it->second.anchor_frame) has_anchor[obs.landmark] = true;
  }
  for (auto it = state.landmarks.begin(); it != state.landmarks.end();) {
    const bool keep = counts[it->first] >= 2 && has_anchor[it->first] &&
                      state.frame_slot(it->second.anchor_frame) >= 0;
    it = keep ? std::next(it) : state.landmarks.erase(it);
  }
  std::erase_if(state.observations, [&](const ReprojObservation& obs) {
    return !state.landmarks.count(obs.landmark) || state.frame_slot(obs.frame) < 0;
  });
}

}  // namespace mcvo
