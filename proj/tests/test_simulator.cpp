#include <doctest.h>

#include <cmath>

#include "noir/graph.hpp"
#include "noir/simulator.hpp"
#include "oracles.hpp"

using namespace noir;

namespace {

const char* kFourRoad =
    "noir 1 2 4\nroad 1 90 2\nroad 2 90 2\nroad 3 90 2\nroad 4 90 2\nedge 1 3\nedge 3 4\nedge 4 2\n";

SimulationConfig small_grid_config() {
  SimulationConfig cfg;
  cfg.grid = GridSpec{4, 4, 2, 2, 3, {}};
  cfg.grid.options.block_length_min_m = 2000;
  cfg.grid.options.block_length_max_m = 2500;
  cfg.grid.options.lanes_min = cfg.grid.options.lanes_max = 3;
  cfg.p_range = {0.1, 0.3};
  cfg.initial_fill = 0.3;
  cfg.mpc.d0 = 100;
  cfg.steps = 30;
  cfg.seed = 5;
  return cfg;
}

// Interior ring with no boundary roads: every vehicle stays inside.
NoirGraph closed_ring(int n) {
  std::vector<RoadGeometry> geo(n, RoadGeometry{100, 2});
  std::vector<Edge> edges;
  for (int i = 1; i <= n; ++i) {
    edges.push_back({RoadId{i}, RoadId{i % n + 1}});
    edges.push_back({RoadId{i}, RoadId{(i + 1) % n + 1}});
  }
  return NoirGraph(0, 0, n, geo, edges);
}

}  // namespace

TEST_CASE("one step on the four road network") {
  const NoirGraph g = load_noir(kFourRoad);
  SimulationConfig cfg;
  cfg.steps = 1;
  cfg.mpc.d0 = 5;
  cfg.p_range = {0.1, 0.3};
  const SimulationTrace t = run(g, cfg);
  CHECK(t.states.size() == 2);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].s.sum() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(t.steps[0].k == 1);
  CHECK(t.interior_ids == std::vector<int>{3, 4});
  CHECK(t.models.size() == 1);
  CHECK(t.states[0].maxCoeff() <= 0.5 * 40);
}

TEST_CASE("initial densities") {
  const NoirGraph g = generate_grid(3, 3, 2, 2, 1);
  const VectorXd a = initial_densities(g, 9, 0.5);
  CHECK(a == initial_densities(g, 9, 0.5));
  CHECK(a != initial_densities(g, 10, 0.5));
  CHECK(a.minCoeff() >= 0.0);
  CHECK(((a.array() <= 0.5 * g.interior_capacity().array())).all());
  CHECK(initial_densities(g, 9, 0.0).isZero());
}

TEST_CASE("runs are deterministic and respect the constraints") {
  const SimulationConfig cfg = small_grid_config();
  const SimulationTrace a = run(cfg);
  const SimulationTrace b = run(cfg);
  REQUIRE(a.steps.size() == 30);
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].s == b.steps[k].s);
    CHECK(a.states[k + 1] == b.states[k + 1]);
  }
  const ConstraintAudit audit = audit_constraints(a, cfg.mpc.d0);
  CHECK(audit.ok());
  CHECK(audit.max_budget_error <= 1e-8);
  for (const StepRecord& r : a.steps) {
    CHECK(r.status == QpStatus::optimal);
    CHECK(r.kkt_max <= 1e-8);
    CHECK(r.spectral_radius_a < 1.0);
    CHECK(r.spectral_radius_qp < 1.0);
    CHECK(r.sum_u + r.sum_v == doctest::Approx(cfg.mpc.d0));
  }
}

TEST_CASE("conservation audit and BIBO bound on a grid run") {
  const SimulationConfig cfg = small_grid_config();
  const NoirGraph g = make_network(cfg);
  const SimulationTrace t = run(g, cfg);
  for (const MassBalance& mb : conservation_audit(t, g, t.models)) {
    CHECK_FALSE(mb.flagged);
    // independent recomputation of 1^T (A x + B s)
    const auto& model = t.models[mb.k - 1];
    const StateSpace<double> ss = assemble(g, model);
    const double predicted = (ss.A * t.states[mb.k - 1] + ss.B * t.steps[mb.k - 1].s).sum();
    CHECK(std::abs(predicted - t.states[mb.k].sum()) <= 1e-8 * (1 + predicted));
  }
  const BiboCheck bibo = bibo_check(t, g);
  CHECK(bibo.ok());
  CHECK(bibo.max_state_norm_sq <= bibo.bound);

  SimulationConfig lean = cfg;
  lean.retain_models = false;
  const SimulationTrace t2 = run(g, lean);
  CHECK(t2.models.empty());
  CHECK_THROWS(conservation_audit(t2, g, t2.models));
}

TEST_CASE("closed network conserves mass") {
  const NoirGraph g = closed_ring(6);
  CHECK_FALSE(validate(g).ok());
  VectorXd x = VectorXd::LinSpaced(6, 3, 30);
  for (int k = 1; k <= 50; ++k) {
    const ProbabilityModel m = sample(g, 4, k);
    const StateSpace<double> ss = assemble(g, m);
    const VectorXd next = propagate(ss, x, VectorXd(VectorXd::Zero(0)));
    CHECK(std::abs(next.sum() - x.sum()) <= 1e-10);
    x = next;
  }
}

TEST_CASE("steady state detection on synthetic series") {
  const std::vector<double> flat(100, 200.0);
  CHECK(detect_steady_state(flat, flat, 50, 0.1) == 1);

  std::vector<double> osc(100);
  for (std::size_t i = 0; i < osc.size(); ++i) osc[i] = i % 2 ? 240.0 : 160.0;
  CHECK_FALSE(detect_steady_state(osc, flat, 50, 0.1).has_value());
  CHECK_FALSE(detect_steady_state(flat, osc, 50, 0.1).has_value());

  std::vector<double> late(100, 200.0);
  for (int i = 0; i < 29; ++i) late[i] = 50.0 + i;
  CHECK(detect_steady_state(late, flat, 10, 0.1) == 30);

  // a window of 10% spread around the mean is still steady
  std::vector<double> band(60);
  for (std::size_t i = 0; i < band.size(); ++i) band[i] = i % 2 ? 210.0 : 190.0;
  CHECK(detect_steady_state(band, band, 50, 0.1) == 1);
  CHECK_FALSE(detect_steady_state(band, band, 50, 0.099).has_value());

  CHECK_FALSE(detect_steady_state(std::vector<double>(10, 1.0), std::vector<double>(10, 1.0), 50, 0.1));
  CHECK_THROWS(detect_steady_state(flat, flat, 0, 0.1));
  CHECK_THROWS(detect_steady_state(flat, std::vector<double>(3), 1, 0.1));
}

TEST_CASE("constraint audit flags violations") {
  SimulationTrace t;
  t.x_max = VectorXd::Constant(2, 10);
  t.states = {VectorXd::Constant(2, 5), (VectorXd(2) << 11, -1).finished()};
  StepRecord r;
  r.k = 1;
  r.s = (VectorXd(2) << 3, -0.5).finished();
  t.steps.push_back(r);
  const ConstraintAudit a = audit_constraints(t, 4.0);
  CHECK(a.max_budget_error == doctest::Approx(1.5));
  CHECK(a.min_control == doctest::Approx(-0.5));
  CHECK(a.min_density == doctest::Approx(-1.0));
  CHECK(a.max_cap_excess == doctest::Approx(1.0));
  CHECK_FALSE(a.ok());
}

TEST_CASE("step errors name the step") {
  SimulationConfig cfg = small_grid_config();
  cfg.mpc.d0 = 1e6;
  try {
    run(cfg);
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == 1);
    CHECK(e.infeasible());
    CHECK(std::string(e.what()).rfind("step 1:", 0) == 0);
  }
  cfg.mpc.shrink_d0_on_infeasible = true;
  cfg.mpc.max_shrinks = 30;
  cfg.steps = 3;
  const SimulationTrace t = run(cfg);
  CHECK(t.steps[0].d0_used < 1e6);
}

TEST_CASE("invalid networks and configs are rejected") {
  const NoirGraph bad = load_noir_file(std::string(NOIR_TEST_DATA) + "/inlet_to_outlet.noir");
  CHECK_THROWS_WITH(run(bad, SimulationConfig{}), doctest::Contains("inlet-out-neighbor-not-interior"));
  SimulationConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS(cfg.check());
  cfg = SimulationConfig{};
  cfg.initial_fill = 1.5;
  CHECK_THROWS(cfg.check());
}
