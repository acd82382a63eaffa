#include "noir/mpc.hpp"

namespace noir {

void MpcConfig::check(Eigen::Index interior_count) const {
  if (!(beta >= 0.0)) throw Error("mpc: beta must be >= 0");
  if (!(d0 > 0.0)) throw Error("mpc: d0 must be > 0");
  if (horizon < 1) throw Error("mpc: horizon must be >= 1");
  if (x_max.size() != interior_count) throw Error("mpc: x_max must cover every interior road");
  if (!(x_max.array() > 0.0).all()) throw Error("mpc: x_max must be positive");
  if (max_shrinks < 0) throw Error("mpc: max_shrinks must be >= 0");
  if (inlet_count < 0) throw Error("mpc: inlet_count must be >= 0");
}

CostMatrices build_cost(const PredictionModel<double>& pm, const VectorXd& x, double beta) {
  const Eigen::Index nu = pm.H.cols();
  if (x.size() != pm.G.cols()) throw Error("build_cost: state dimension mismatch");
  CostMatrices c;
  c.W1 = MatrixXd::Identity(nu, nu);
  c.W2 = VectorXd::Zero(nu);
  if (beta == 0.0) return c;
  const VectorXd gx = pm.G * x;
  c.W1.noalias() += beta * (pm.H.transpose() * pm.H);
  // Exact symmetry; H^T H is symmetric only up to rounding.
  c.W1 = ((c.W1 + c.W1.transpose()) * 0.5).eval();
  c.W2.noalias() = beta * (pm.H.transpose() * gx);
  c.W3 = 0.5 * beta * gx.squaredNorm();
  return c;
}

ConstraintMatrices build_constraints(const PredictionModel<double>& pm, const VectorXd& x,
                                     const MpcConfig& cfg, double d0) {
  const Eigen::Index n = pm.states();
  const Eigen::Index m = pm.inputs();
  const int horizon = pm.horizon;
  const Eigen::Index nu = m * horizon;
  const Eigen::Index nx = n * horizon;
  if (x.size() != n) throw Error("build_constraints: state dimension mismatch");
  if (cfg.x_max.size() != n) throw Error("build_constraints: x_max dimension mismatch");

  const VectorXd gx = pm.G * x;
  const VectorXd x_max_stacked = cfg.x_max.replicate(horizon, 1);
  const Eigen::Index rows = nu + nx + (cfg.density_lower_bound ? nx : 0);

  ConstraintMatrices c;
  c.A_ineq = MatrixXd::Zero(rows, nu);
  c.b_ineq = VectorXd::Zero(rows);
  c.A_ineq.topRows(nu) = -MatrixXd::Identity(nu, nu);
  c.A_ineq.middleRows(nu, nx) = pm.H;
  c.b_ineq.segment(nu, nx) = gx - x_max_stacked;
  if (cfg.density_lower_bound) {
    c.A_ineq.bottomRows(nx) = -pm.H;
    c.b_ineq.tail(nx) = -gx;
  }

  c.A_eq = MatrixXd::Zero(horizon, nu);
  for (int r = 0; r < horizon; ++r) c.A_eq.block(r, r * m, 1, m).setOnes();
  c.b_eq = VectorXd::Constant(horizon, -d0);
  return c;
}

QpProblem<double> build_qp(const PredictionModel<double>& pm, const VectorXd& x,
                           const MpcConfig& cfg, double d0) {
  CostMatrices cost = build_cost(pm, x, cfg.beta);
  ConstraintMatrices cons = build_constraints(pm, x, cfg, d0);
  return QpProblem<double>{std::move(cost.W1), std::move(cost.W2), std::move(cons.A_ineq),
                           std::move(cons.b_ineq), std::move(cons.A_eq), std::move(cons.b_eq)};
}

std::string describe_constraint(Eigen::Index row, const PredictionModel<double>& pm) {
  const Eigen::Index n = pm.states();
  const Eigen::Index m = pm.inputs();
  const Eigen::Index nu = m * pm.horizon;
  const Eigen::Index nx = n * pm.horizon;
  auto where = [](Eigen::Index idx, Eigen::Index block) {
    return "step +" + std::to_string(idx / block + 1) + ", index " + std::to_string(idx % block);
  };
  if (row < nu) return "boundary flow >= 0 (" + where(row, m) + ")";
  if (row < nu + nx) return "density <= rho_max (" + where(row - nu, n) + ")";
  return "density >= 0 (" + where(row - nu - nx, n) + ")";
}

MpcStepResult step(const PredictionModel<double>& pm, const VectorXd& x, const MpcConfig& cfg,
                   const QpOptions& qp_options, const VectorXd* warm_start) {
  cfg.check(pm.states());
  MpcStepResult result;
  double d0 = cfg.d0;
  const int attempts = cfg.shrink_d0_on_infeasible ? cfg.max_shrinks + 1 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt, d0 *= 0.5) {
    const QpProblem<double> qp = build_qp(pm, x, cfg, d0);
    result.qp = solve(qp, qp_options, warm_start);
    result.d0_used = d0;
    result.d0_shrinks = attempt;
    if (result.qp.status != QpStatus::infeasible) break;
  }

  if (result.qp.status == QpStatus::infeasible) {
    std::vector<std::string> binding;
    const auto& cert = *result.qp.certificate;
    for (Eigen::Index row : result.qp.active_set) binding.push_back(describe_constraint(row, pm));
    binding.push_back("violated: " + describe_constraint(cert.violated, pm));
    throw MpcInfeasibleError("MPC problem infeasible (d0 = " + std::to_string(result.d0_used) +
                                 "); violated " + describe_constraint(cert.violated, pm),
                             cert, std::move(binding));
  }
  if (result.qp.status != QpStatus::optimal) {
    throw Error(std::string("MPC QP did not reach optimality: ") + to_string(result.qp.status) +
                " after " + std::to_string(result.qp.iterations) + " iterations");
  }

  const Eigen::Index m = pm.inputs();
  result.U = result.qp.u_star;
  result.control.s = result.U.head(m);
  result.control.inlet_count = cfg.inlet_count;
  result.predicted = pm.G * x + pm.H * result.U;
  result.cost = 0.5 * result.U.squaredNorm() + 0.5 * cfg.beta * result.predicted.squaredNorm();
  return result;
}

}  // namespace noir
