#pragma once

#include <string>
#include <vector>

#include "noir/qp.hpp"
#include "noir/state_space.hpp"
#include "noir/types.hpp"

namespace noir {

struct MpcConfig {
  double beta = 0.0;   ///< weight on interior densities
  double d0 = 400.0;   ///< vehicles crossing the boundary per step
  int horizon = 5;     ///< prediction steps
  VectorXd x_max;      ///< capacity of each interior road, state order
  int inlet_count = 0; ///< N_in, splits s into inflows and outflows
  /// Keep the X >= 0 rows (-H U - G x <= 0). Without them only the density
  /// caps and U >= 0 are imposed.
  bool density_lower_bound = true;
  /// On an infeasible QP, halve d0 up to `max_shrinks` times before failing.
  bool shrink_d0_on_infeasible = false;
  int max_shrinks = 4;

  void check(Eigen::Index interior_count) const;
};

/// s over boundary roads 1..N_out: inflows u for the first N_in entries,
/// outflows v for the rest. All entries are vehicles per step.
struct BoundaryControl {
  VectorXd s;
  Eigen::Index inlet_count = 0;

  double total_inflow() const { return s.head(inlet_count).sum(); }
  double total_outflow() const { return s.tail(s.size() - inlet_count).sum(); }
};

struct CostMatrices {
  MatrixXd W1;  ///< I + beta H^T H
  VectorXd W2;  ///< beta H^T G x
  double W3 = 0.0;  ///< beta/2 x^T G^T G x, constant in U
};

/// Inequalities [-I; H; -H] U + [0; G x - x_max; -G x] <= 0 (last block only
/// with density_lower_bound) and the per-step budget (I (x) 1^T) U - d0 1 = 0.
struct ConstraintMatrices {
  MatrixXd A_ineq;
  VectorXd b_ineq;
  MatrixXd A_eq;
  VectorXd b_eq;
};

CostMatrices build_cost(const PredictionModel<double>& pm, const VectorXd& x, double beta);
ConstraintMatrices build_constraints(const PredictionModel<double>& pm, const VectorXd& x,
                                     const MpcConfig& cfg, double d0);
QpProblem<double> build_qp(const PredictionModel<double>& pm, const VectorXd& x,
                           const MpcConfig& cfg, double d0);

/// Human-readable name of an inequality row of build_constraints.
std::string describe_constraint(Eigen::Index row, const PredictionModel<double>& pm);

struct MpcStepResult {
  BoundaryControl control;
  VectorXd U;
  VectorXd predicted;  ///< X = G x + H U
  QpSolution<double> qp;
  double d0_used = 0.0;
  int d0_shrinks = 0;
  /// Full cost 1/2 U^T U + beta/2 X^T X, i.e. QP objective plus W3.
  double cost = 0.0;
};

class MpcInfeasibleError : public Error {
 public:
  MpcInfeasibleError(const std::string& what, InfeasibilityCertificate<double> certificate,
                     std::vector<std::string> binding)
      : Error(what), certificate_(std::move(certificate)), binding_(std::move(binding)) {}
  const InfeasibilityCertificate<double>& certificate() const { return certificate_; }
  /// Constraints active when infeasibility was detected, plus the violated one.
  const std::vector<std::string>& binding() const { return binding_; }

 private:
  InfeasibilityCertificate<double> certificate_;
  std::vector<std::string> binding_;
};

/// Solves the MPC QP for state x and returns the first block of U*.
MpcStepResult step(const PredictionModel<double>& pm, const VectorXd& x, const MpcConfig& cfg,
                   const QpOptions& qp_options = {}, const VectorXd* warm_start = nullptr);

}  // namespace noir
