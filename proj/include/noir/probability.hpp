#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "noir/graph.hpp"
#include "noir/types.hpp"

namespace noir {

/// The linear system I - QP could not be solved to the required accuracy;
/// this means the spectral radius of QP is not safely below one.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

struct ProbabilityRange {
  double lo = 0.05;
  double hi = 0.95;
};

/// Per-step stochastic parameters of the network.
///
/// `p` holds the flow probability of each interior road (state order).
/// `fractions` holds q_{i,j} for every edge (j, i) whose source j is not an
/// outlet, sorted by edge; `Q` is its restriction to interior pairs with
/// Q(i, j) = q_{i+N_out, j+N_out} in state indices.
struct ProbabilityModel {
  VectorXd p;
  MatrixXd Q;
  std::vector<std::pair<Edge, double>> fractions;

  /// q_{to,from}; zero when there is no such edge.
  double q(RoadId to, RoadId from) const;
  MatrixXd P() const { return p.asDiagonal(); }
  MatrixXd QP() const { return Q * p.asDiagonal(); }
};

/// Interior densities plus the constant boundary densities.
struct TrafficState {
  VectorXd x;
  VectorXd boundary;
};

/// Draws p uniformly in `range` and routing fractions from a flat Dirichlet
/// over each road's out-neighbors. Keyed by (seed, step, road), so the result
/// does not depend on call order.
ProbabilityModel sample(const NoirGraph& graph, std::uint64_t seed, std::uint64_t step,
                        ProbabilityRange range = {});

/// Fixed point of y = QP (x + y), by LU solve of (I - QP) y = QP x.
VectorXd compute_inflow(const ProbabilityModel& model, const VectorXd& x);

/// z = P (x + y).
VectorXd compute_outflow(const ProbabilityModel& model, const VectorXd& x);

}  // namespace noir
