#include "noir/state_space.hpp"

#include <string>

namespace noir {

MatrixXd input_matrix(const NoirGraph& graph, const ProbabilityModel* model) {
  const Eigen::Index n = graph.interior_count();
  MatrixXd b = MatrixXd::Zero(n, graph.boundary_count());
  for (Eigen::Index i = 0; i < n; ++i) {
    const RoadId road = graph.interior_road(i);
    for (RoadId j : graph.in_neighbors(road)) {
      if (graph.classify(j) == RoadClass::inlet) {
        b(i, j.value - 1) = model ? model->q(road, j) : 1.0;
      }
    }
    for (RoadId j : graph.out_neighbors(road)) {
      if (graph.classify(j) == RoadClass::outlet) b(i, j.value - 1) = -1.0;
    }
  }
  return b;
}

StateSpace<double> assemble(const NoirGraph& graph, const ProbabilityModel& model,
                            const AssembleOptions& options) {
  const Eigen::Index n = graph.interior_count();
  if (model.p.size() != n || model.Q.rows() != n || model.Q.cols() != n) {
    throw Error("assemble: probability model does not match the graph");
  }
  StateSpace<double> ss;
  ss.B = input_matrix(graph, options.scale_inlet_columns ? &model : nullptr);
  if (n == 0) {
    ss.A.resize(0, 0);
    return ss;
  }

  const MatrixXd transposed = (MatrixXd::Identity(n, n) - model.QP()).transpose();
  const MatrixXd rhs = (VectorXd::Ones(n) - model.p).asDiagonal();
  Eigen::PartialPivLU<MatrixXd> lu(transposed);
  const MatrixXd at = lu.solve(rhs);
  const double residual = (transposed * at - rhs).lpNorm<Eigen::Infinity>();
  if (!at.allFinite() || residual > options.residual_guard) {
    throw SingularSystemError("I - QP is near-singular: solve residual " + std::to_string(residual));
  }
  ss.A = at.transpose();
  return ss;
}

VectorXd elementwise_propagate(const NoirGraph& graph, const ProbabilityModel& model,
                               const VectorXd& x, const VectorXd& s) {
  const Eigen::Index n = graph.interior_count();
  if (x.size() != n || s.size() != graph.boundary_count()) {
    throw Error("elementwise_propagate: dimension mismatch");
  }
  const VectorXd z = compute_outflow(model, x);
  VectorXd next(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RoadId road = graph.interior_road(i);
    double arriving = 0.0;
    for (RoadId j : graph.in_neighbors(road)) {
      const double q = model.q(road, j);
      switch (graph.classify(j)) {
        case RoadClass::inlet:
          arriving += q * s[j.value - 1];
          break;
        case RoadClass::interior:
          arriving += q * z[graph.state_index(j)];
          break;
        case RoadClass::outlet:
          break;
      }
    }
    next[i] = (1.0 - model.p[i]) * (x[i] + arriving);
  }
  return next;
}

}  // namespace noir
