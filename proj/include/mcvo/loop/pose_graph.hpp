#pragma once

#include <vector>

#include <Eigen/Core>

#include "mcvo/geometry/pose.hpp"

namespace mcvo {

/// Measured T_from^-1 T_to.
struct PoseGraphEdge {
  int from = 0;
  int to = 0;
  Pose measurement;
  Eigen::Matrix<double, 6, 6> information = Eigen::Matrix<double, 6, 6>::Identity();
  /// Loop edges are robustified; sequential edges are not.
  bool loop = false;
};

struct PoseGraph {
  std::vector<Pose> vertices;
  std::vector<PoseGraphEdge> edges;
};

struct PoseGraphOptions {
  int max_iterations = 100;
  /// Huber threshold on the loop-edge Mahalanobis norm.
  double huber_delta = 1.0;
  double step_tolerance = 1e-8;
  int fixed_vertex = 0;
};

struct PoseGraphReport {
  int iterations = 0;
  std::vector<double> cost_trace;
  bool converged = false;
};

/// Residual Log(Z^-1 T_from^-1 T_to) as (axis-angle, translation).
Eigen::Matrix<double, 6, 1> edge_residual(const PoseGraph& graph, const PoseGraphEdge& edge);

double pose_graph_cost(const PoseGraph& graph, const PoseGraphOptions& options = {});

/// Damped Gauss-Newton with the fixed vertex held constant, until the step
/// norm drops below step_tolerance. Throws std::invalid_argument when the
/// edges do not connect every vertex or reference a missing vertex.
PoseGraphReport optimize_pose_graph(PoseGraph& graph, const PoseGraphOptions& options = {});

}  // namespace mcvo
