#include "mcvo/loop/pose_graph.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace mcvo {

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

Vector6d residual(const Pose& a, const Pose& b, const Pose& z) {
  return pose_log(inverse(z) * inverse(a) * b);
}

/// Gradient weight and Gauss-Newton information of an edge. In Huber's
/// linear region the curvature along the whitened residual is dropped, which
/// keeps the block positive semidefinite and avoids slow reweighting.
std::pair<double, Matrix6d> robust_terms(const Vector6d& r, const PoseGraphEdge& edge,
                                         const PoseGraphOptions& options) {
  const double d = options.huber_delta;
  const double e2 = r.dot(edge.information * r);
  if (!edge.loop || e2 <= d * d) return {1.0, edge.information};
  const double w = d / std::sqrt(e2);
  const Vector6d ir = edge.information * r;
  return {w, w * (edge.information - ir * ir.transpose() / e2)};
}

double robust_cost(double e2, const PoseGraphEdge& edge, const PoseGraphOptions& options) {
  const double d = options.huber_delta;
  if (!edge.loop || e2 <= d * d) return e2;
  return 2.0 * d * std::sqrt(e2) - d * d;
}

void check_connected(const PoseGraph& graph) {
  const int n = static_cast<int>(graph.vertices.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& e : graph.edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      throw std::invalid_argument("pose graph edge references a missing vertex");
    }
    parent[root(e.from)] = root(e.to);
  }
  for (int v = 1; v < n; ++v) {
    if (root(v) != root(0)) throw std::invalid_argument("pose graph is disconnected");
  }
}

}  // namespace

Eigen::Matrix<double, 6, 1> edge_residual(const PoseGraph& graph, const PoseGraphEdge& edge) {
  return residual(graph.vertices.at(edge.from), graph.vertices.at(edge.to), edge.measurement);
}

double pose_graph_cost(const PoseGraph& graph, const PoseGraphOptions& options) {
  double cost = 0.0;
  for (const auto& e : graph.edges) {
    const Vector6d r = edge_residual(graph, e);
    cost += robust_cost(r.dot(e.information * r), e, options);
  }
  return 0.5 * cost;
}

PoseGraphReport optimize_pose_graph(PoseGraph& graph, const PoseGraphOptions& options) {
  check_connected(graph);
  PoseGraphReport report;
  const int n = static_cast<int>(graph.vertices.size());
  std::vector<int> var(n, -1);
  int nv = 0;
  for (int v = 0; v < n; ++v) {
    if (v != options.fixed_vertex) var[v] = nv++;
  }
  double cost = pose_graph_cost(graph, options);
  report.cost_trace.push_back(cost);
  if (nv == 0) {
    report.converged = true;
    return report;
  }
  const double h = 1e-7;
  double mu = 1e-6;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    ++report.iterations;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(6 * nv);
    for (const auto& e : graph.edges) {
      const Pose& a = graph.vertices[e.from];
      const Pose& b = graph.vertices[e.to];
      const Vector6d r = residual(a, b, e.measurement);
      Matrix6d Ja, Jb;
      for (int k = 0; k < 6; ++k) {
        Vector6d d = Vector6d::Zero();
        d(k) = h;
        Ja.col(k) = (residual(box_plus(a, d), b, e.measurement) -
                     residual(box_plus(a, -d), b, e.measurement)) / (2 * h);
        Jb.col(k) = (residual(a, box_plus(b, d), e.measurement) -
                     residual(a, box_plus(b, -d), e.measurement)) / (2 * h);
      }
      const auto [w, W] = robust_terms(r, e, options);
      const int va = var[e.from], vb = var[e.to];
      const int idx[2] = {va, vb};
      const Matrix6d* J[2] = {&Ja, &Jb};
      for (int p = 0; p < 2; ++p) {
        if (idx[p] < 0) continue;
        g.segment<6>(6 * idx[p]) += w * J[p]->transpose() * e.information * r;
        for (int q = 0; q < 2; ++q) {
          if (idx[q] < 0) continue;
          const Matrix6d block = J[p]->transpose() * W * *J[q];
          for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
              triplets.emplace_back(6 * idx[p] + i, 6 * idx[q] + j, block(i, j));
            }
          }
        }
      }
    }
    Eigen::SparseMatrix<double> H(6 * nv, 6 * nv);
    H.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::VectorXd diag = H.diagonal();

    bool accepted = false;
    double step_norm = 0.0;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> A = H;
      for (int i = 0; i < 6 * nv; ++i) A.coeffRef(i, i) += mu * std::max(diag(i), 1e-9);
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
      if (solver.info() != Eigen::Success) {
        mu *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-g);
      step_norm = dx.norm();
      PoseGraph trial = graph;
      for (int v = 0; v < n; ++v) {
        if (var[v] >= 0) trial.vertices[v] = box_plus(graph.vertices[v], dx.segment<6>(6 * var[v]));
      }
      const double trial_cost = pose_graph_cost(trial, options);
      if (dx.allFinite() && trial_cost <= cost) {
        graph = std::move(trial);
        cost = trial_cost;
        report.cost_trace.push_back(cost);
        mu = std::max(mu / 10.0, 1e-12);
        accepted = true;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted || step_norm < options.step_tolerance) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace mcvo
