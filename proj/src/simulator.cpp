#include "noir/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "noir/linalg.hpp"
#include "noir/random.hpp"

namespace noir {

void SimulationConfig::check() const {
  if (steps < 1) throw Error("sim: steps must be >= 1");
  if (!(initial_fill >= 0.0 && initial_fill <= 1.0)) throw Error("sim: initial_fill must be in [0, 1]");
  if (!(vehicle_length_m > 0.0)) throw Error("network: vehicle_length_m must be > 0");
  if (!(p_range.lo >= 0.0 && p_range.lo <= p_range.hi && p_range.hi < 1.0)) {
    throw Error("sim: need 0 <= p_min <= p_max < 1");
  }
}

VectorXd initial_densities(const NoirGraph& graph, std::uint64_t seed, double fill) {
  VectorXd x(graph.interior_count());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const RoadId road = graph.interior_road(i);
    KeyedRng rng{seed, static_cast<std::uint64_t>(Stream::initial_density),
                 static_cast<std::uint64_t>(road.value)};
    x[i] = rng.uniform(0.0, fill * graph.rho_max(road));
  }
  return x;
}

NoirGraph make_network(const SimulationConfig& cfg) {
  if (!cfg.network_path.empty()) return load_noir_file(cfg.network_path, cfg.vehicle_length_m);
  GridOptions options = cfg.grid.options;
  options.vehicle_length_m = cfg.vehicle_length_m;
  return generate_grid(cfg.grid.rows, cfg.grid.cols, cfg.grid.inlets, cfg.grid.outlets,
                       cfg.grid.seed, options);
}

SimulationTrace run(const NoirGraph& graph, const SimulationConfig& cfg) {
  cfg.check();
  const auto report = validate(graph);
  if (!report.ok()) {
    const Violation& v = report.violations.front();
    throw Error("network failed validation: " + v.rule + " at " + v.subject + " (" +
                std::to_string(report.violations.size()) + " violation(s))");
  }
  const auto started = std::chrono::steady_clock::now();

  MpcConfig mpc = cfg.mpc;
  mpc.x_max = graph.interior_capacity();
  mpc.inlet_count = graph.inlet_count();
  mpc.check(graph.interior_count());
  AssembleOptions assemble_options;
  assemble_options.scale_inlet_columns = cfg.scale_inlet_columns;

  SimulationTrace trace;
  trace.inlet_count = graph.inlet_count();
  trace.x_max = mpc.x_max;
  trace.seed = cfg.seed;
  for (Eigen::Index i = 0; i < graph.interior_count(); ++i) {
    trace.interior_ids.push_back(graph.interior_road(i).value);
  }
  trace.states.push_back(initial_densities(graph, cfg.seed, cfg.initial_fill));

  VectorXd warm;
  for (int k = 1; k <= cfg.steps; ++k) {
    const VectorXd& x = trace.states.back();
    StepRecord rec;
    rec.k = k;
    try {
      ProbabilityModel model = sample(graph, cfg.seed, static_cast<std::uint64_t>(k), cfg.p_range);
      const StateSpace<double> ss = assemble(graph, model, assemble_options);
      const PredictionModel<double> pm = build_prediction(ss, mpc.horizon);
      const MpcStepResult res = step(pm, x, mpc, QpOptions{}, warm.size() ? &warm : nullptr);

      rec.s = res.control.s;
      rec.sum_u = res.control.total_inflow();
      rec.sum_v = res.control.total_outflow();
      rec.cost = res.cost;
      rec.status = res.qp.status;
      rec.qp_iterations = res.qp.iterations;
      rec.kkt_max = res.qp.kkt.max();
      rec.spectral_radius_a = spectral_radius(ss.A).radius;
      rec.spectral_radius_qp = spectral_radius(model.QP()).radius;
      rec.d0_used = res.d0_used;
      rec.predicted = res.predicted;

      // Warm start: shift the optimal sequence by one step.
      const Eigen::Index m = pm.inputs();
      warm = res.U;
      if (mpc.horizon > 1) {
        warm.head(m * (mpc.horizon - 1)) = res.U.tail(m * (mpc.horizon - 1));
      }
      trace.states.push_back(propagate(ss, x, rec.s));
      if (cfg.retain_models) trace.models.push_back(std::move(model));
    } catch (const MpcInfeasibleError& e) {
      throw StepError(k, e.what(), true);
    } catch (const StepError&) {
      throw;
    } catch (const Error& e) {
      throw StepError(k, e.what(), false);
    }
    trace.steps.push_back(std::move(rec));
  }
  trace.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

SimulationTrace run(const SimulationConfig& cfg) {
  cfg.check();
  return run(make_network(cfg), cfg);
}

std::optional<int> detect_steady_state(const std::vector<double>& sum_u,
                                       const std::vector<double>& sum_v, int window, double tol) {
  if (window < 1) throw Error("steady-state window must be >= 1");
  if (sum_u.size() != sum_v.size()) throw Error("steady-state series lengths differ");
  const int count = static_cast<int>(sum_u.size());
  auto settled = [&](const std::vector<double>& series, int start) {
    const auto first = series.begin() + start;
    const auto last = first + window;
    const auto [lo, hi] = std::minmax_element(first, last);
    double mean = 0.0;
    for (auto it = first; it != last; ++it) mean += *it;
    mean /= window;
    return (*hi - *lo) <= tol * std::abs(mean);
  };
  for (int start = 0; start + window <= count; ++start) {
    if (settled(sum_u, start) && settled(sum_v, start)) return start + 1;
  }
  return std::nullopt;
}

std::optional<int> detect_steady_state(const SimulationTrace& trace, int window, double tol) {
  std::vector<double> u, v;
  for (const StepRecord& rec : trace.steps) {
    u.push_back(rec.sum_u);
    v.push_back(rec.sum_v);
  }
  return detect_steady_state(u, v, window, tol);
}

std::vector<MassBalance> conservation_audit(const SimulationTrace& trace, const NoirGraph& graph,
                                            const std::vector<ProbabilityModel>& models,
                                            double tolerance) {
  if (models.size() != trace.steps.size()) {
    throw Error("conservation audit needs one retained model per step");
  }
  // Boundary net flow: each inlet adds u_j to every interior road it feeds,
  // each outlet removes v_j from every interior road draining into it.
  std::vector<double> boundary_weight(graph.boundary_count(), 0.0);
  for (int j = 1; j <= graph.boundary_count(); ++j) {
    const RoadId road{j};
    if (graph.classify(road) == RoadClass::inlet) {
      for (RoadId i : graph.out_neighbors(road)) boundary_weight[j - 1] += graph.is_interior(i) ? 1.0 : 0.0;
    } else {
      for (RoadId i : graph.in_neighbors(road)) boundary_weight[j - 1] -= graph.is_interior(i) ? 1.0 : 0.0;
    }
  }

  std::vector<MassBalance> out;
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const VectorXd& x = trace.states[k];
    const VectorXd& next = trace.states[k + 1];
    const VectorXd& s = trace.steps[k].s;
    const ProbabilityModel& model = models[k];

    MassBalance mb;
    mb.k = trace.steps[k].k;
    mb.delta_mass = next.sum() - x.sum();
    for (int j = 0; j < graph.boundary_count(); ++j) mb.boundary_net += boundary_weight[j] * s[j];
    const VectorXd z = compute_outflow(model, x);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const RoadId road = graph.interior_road(i);
      for (RoadId j : graph.out_neighbors(road)) {
        if (graph.classify(j) == RoadClass::outlet) mb.routing_loss += model.q(j, road) * z[i];
      }
    }
    mb.imbalance = mb.delta_mass - mb.boundary_net + mb.routing_loss;
    const double scale = 1.0 + x.lpNorm<1>() + s.lpNorm<1>();
    mb.flagged = std::abs(mb.imbalance) > tolerance * scale;
    out.push_back(mb);
  }
  return out;
}

BiboCheck bibo_check(const SimulationTrace& trace, const NoirGraph& graph) {
  BiboCheck check;
  const MatrixXd b = input_matrix(graph);
  if (!trace.states.empty()) check.z_max = trace.states.front().cwiseAbs().maxCoeff();
  for (const StepRecord& rec : trace.steps) {
    if (b.rows() > 0) check.z_max = std::max(check.z_max, (b * rec.s).cwiseAbs().maxCoeff());
    check.r_a = std::max(check.r_a, rec.spectral_radius_a);
  }
  for (const VectorXd& x : trace.states) {
    check.max_state_norm_sq = std::max(check.max_state_norm_sq, x.squaredNorm());
  }
  check.bound = check.r_a < 1.0 ? check.z_max * check.z_max * graph.interior_count() / (1.0 - check.r_a)
                                 : std::numeric_limits<double>::infinity();
  return check;
}

ConstraintAudit audit_constraints(const SimulationTrace& trace, double d0) {
  ConstraintAudit a;
  a.min_control = std::numeric_limits<double>::infinity();
  a.min_density = std::numeric_limits<double>::infinity();
  a.max_cap_excess = -std::numeric_limits<double>::infinity();
  for (const StepRecord& rec : trace.steps) {
    a.max_budget_error = std::max(a.max_budget_error, std::abs(rec.s.sum() - d0));
    if (rec.s.size()) a.min_control = std::min(a.min_control, rec.s.minCoeff());
  }
  for (const VectorXd& x : trace.states) {
    if (x.size() == 0) continue;
    a.min_density = std::min(a.min_density, x.minCoeff());
    a.max_cap_excess = std::max(a.max_cap_excess, (x - trace.x_max).maxCoeff());
  }
  return a;
}

}  // namespace noir
