#pragma once

#include <vector>

#include "noir/graph.hpp"
#include "noir/probability.hpp"
#include "noir/types.hpp"

namespace noir {

/// x[k+1] = A x[k] + B s[k] over the interior roads.
template <typename Scalar>
struct StateSpace {
  Matrix<Scalar> A;  ///< (N - N_out) x (N - N_out)
  Matrix<Scalar> B;  ///< (N - N_out) x N_out, entries in {-1, 0, 1}
};

/// Horizon-stacked prediction X = G x + H U.
template <typename Scalar>
struct PredictionModel {
  Matrix<Scalar> G;  ///< block r (1-based) is A^r
  Matrix<Scalar> H;  ///< block (r, c) is A^(r-c) B for r >= c
  int horizon = 0;

  Eigen::Index states() const { return horizon > 0 ? G.rows() / horizon : 0; }
  Eigen::Index inputs() const { return horizon > 0 ? H.cols() / horizon : 0; }
};

struct AssembleOptions {
  /// Replace the +1 inlet entries of B by the routing fraction q_{i,j}.
  /// Off by default; the plain +-1 pattern is the reference model.
  bool scale_inlet_columns = false;
  /// Reject the model when the A solve residual exceeds this.
  double residual_guard = 1e-8;
};

/// A = (I - P)(I - QP)^-1 via an LU solve of (I - QP)^T A^T = (I - P).
StateSpace<double> assemble(const NoirGraph& graph, const ProbabilityModel& model,
                            const AssembleOptions& options = {});

/// Input matrix only: +1 where boundary road j feeds interior road i, -1 where
/// interior road i drains into boundary road j.
MatrixXd input_matrix(const NoirGraph& graph, const ProbabilityModel* model = nullptr);

template <typename Scalar>
PredictionModel<Scalar> build_prediction(const StateSpace<Scalar>& ss, int horizon) {
  if (horizon < 1) throw Error("prediction horizon must be >= 1");
  const Eigen::Index n = ss.A.rows();
  const Eigen::Index m = ss.B.cols();
  if (ss.A.cols() != n || ss.B.rows() != n) throw Error("build_prediction: A/B dimension mismatch");

  PredictionModel<Scalar> pm;
  pm.horizon = horizon;
  pm.G.resize(n * horizon, n);
  pm.H = Matrix<Scalar>::Zero(n * horizon, m * horizon);

  // powers_b[k] = A^k B, each obtained from the previous one.
  std::vector<Matrix<Scalar>> powers_b;
  powers_b.reserve(horizon);
  powers_b.push_back(ss.B);
  Matrix<Scalar> power = ss.A;
  for (int r = 0; r < horizon; ++r) {
    if (r > 0) {
      power = (ss.A * power).eval();
      powers_b.push_back((ss.A * powers_b.back()).eval());
    }
    pm.G.middleRows(r * n, n) = power;
  }
  for (int r = 0; r < horizon; ++r) {
    for (int c = 0; c <= r; ++c) pm.H.block(r * n, c * m, n, m) = powers_b[r - c];
  }
  return pm;
}

template <typename Scalar>
Vector<Scalar> propagate(const StateSpace<Scalar>& ss, const Vector<Scalar>& x,
                         const Vector<Scalar>& s) {
  if (x.size() != ss.A.cols() || s.size() != ss.B.cols()) {
    throw Error("propagate: dimension mismatch (x " + std::to_string(x.size()) + ", s " +
                std::to_string(s.size()) + ")");
  }
  return ss.A * x + ss.B * s;
}

/// Road-by-road update rho'_i = (1 - p_i)(rho_i + sum_j q_{i,j} z_j), with
/// z_j = u_j on inlets and z from compute_outflow on interior roads. Outlet
/// releases v do not appear in this form.
VectorXd elementwise_propagate(const NoirGraph& graph, const ProbabilityModel& model,
                               const VectorXd& x, const VectorXd& s);

}  // namespace noir
