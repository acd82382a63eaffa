#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noir/graph.hpp"
#include "noir/mpc.hpp"
#include "noir/probability.hpp"
#include "noir/state_space.hpp"

namespace noir {

struct GridSpec {
  int rows = 8;
  int cols = 8;
  int inlets = 4;
  int outlets = 4;
  std::uint64_t seed = 1;
  GridOptions options;
};

struct SimulationConfig {
  /// Network file; when empty the grid spec is used.
  std::string network_path;
  GridSpec grid;
  double vehicle_length_m = kDefaultVehicleLength;

  std::uint64_t seed = 1;
  int steps = 300;
  MpcConfig mpc;  ///< x_max and inlet_count are filled from the graph
  ProbabilityRange p_range;
  /// Initial densities are uniform in [0, initial_fill * rho_max].
  double initial_fill = 0.5;
  bool scale_inlet_columns = false;
  /// Keep every step's probability model for auditing.
  bool retain_models = true;

  void check() const;
};

struct StepRecord {
  int k = 0;  ///< 1-based; s[k] moves x[k] to x[k+1]
  VectorXd s;
  double sum_u = 0.0;
  double sum_v = 0.0;
  double cost = 0.0;
  QpStatus status = QpStatus::optimal;
  int qp_iterations = 0;
  double kkt_max = 0.0;
  double spectral_radius_a = 0.0;
  double spectral_radius_qp = 0.0;
  double d0_used = 0.0;
  VectorXd predicted;  ///< X = G x[k] + H U*
};

struct SimulationTrace {
  Eigen::Index inlet_count = 0;
  /// states[0] is x[1]; states.size() == steps.size() + 1.
  std::vector<VectorXd> states;
  std::vector<StepRecord> steps;
  std::vector<ProbabilityModel> models;  ///< empty unless retain_models
  VectorXd x_max;
  std::vector<int> interior_ids;  ///< road id of each state entry
  std::uint64_t seed = 0;
  std::string config_echo;
  double wall_time_s = 0.0;
};

VectorXd initial_densities(const NoirGraph& graph, std::uint64_t seed, double fill);

/// Loads or generates the network described by the config.
NoirGraph make_network(const SimulationConfig& cfg);

/// Closed loop: sample, assemble, predict, solve, propagate.
/// Errors are rethrown as StepError carrying the failing step.
SimulationTrace run(const NoirGraph& graph, const SimulationConfig& cfg);
SimulationTrace run(const SimulationConfig& cfg);

class StepError : public Error {
 public:
  StepError(int step, const std::string& what, bool infeasible)
      : Error("step " + std::to_string(step) + ": " + what), step_(step), infeasible_(infeasible) {}
  int step() const { return step_; }
  bool infeasible() const { return infeasible_; }

 private:
  int step_;
  bool infeasible_;
};

/// First 1-based step k such that over steps k..k+window-1 both the total
/// inflow and total outflow vary (max - min) by at most tol times their mean
/// in that window.
std::optional<int> detect_steady_state(const std::vector<double>& sum_u,
                                       const std::vector<double>& sum_v, int window, double tol);
std::optional<int> detect_steady_state(const SimulationTrace& trace, int window, double tol);

struct MassBalance {
  int k = 0;
  double delta_mass = 0.0;    ///< sum x[k+1] - sum x[k]
  double boundary_net = 0.0;  ///< 1^T B s[k]
  double routing_loss = 0.0;  ///< vehicles routed into outlets by q
  double imbalance = 0.0;     ///< delta - boundary_net + routing_loss
  bool flagged = false;
};

/// Per-step mass balance, recomputed from the retained models without A.
std::vector<MassBalance> conservation_audit(const SimulationTrace& trace, const NoirGraph& graph,
                                            const std::vector<ProbabilityModel>& models,
                                            double tolerance = 1e-8);

struct BiboCheck {
  double max_state_norm_sq = 0.0;
  double z_max = 0.0;
  double r_a = 0.0;
  double bound = 0.0;
  bool ok() const { return r_a < 1.0 && max_state_norm_sq <= bound; }
};

/// max_k |x[k]|^2 against z_max^2 (N - N_out) / (1 - r_a) with z_max the
/// largest entry of x[1] or any B s[k] and r_a the largest observed rho(A).
BiboCheck bibo_check(const SimulationTrace& trace, const NoirGraph& graph);

struct ConstraintAudit {
  double max_budget_error = 0.0;  ///< max_k |sum s[k] - d0|
  double min_control = 0.0;       ///< min entry of any s[k]
  double min_density = 0.0;       ///< min entry of any x[k]
  double max_cap_excess = 0.0;    ///< max entry of x[k] - x_max, <= 0 when satisfied
  bool ok(double tol = 1e-8) const {
    return max_budget_error <= tol && min_control >= -tol && min_density >= -tol &&
           max_cap_excess <= tol;
  }
};

/// pi1-pi3 checked on the recorded trajectory.
ConstraintAudit audit_constraints(const SimulationTrace& trace, double d0);

}  // namespace noir
