#include <doctest.h>

#include "noir/graph.hpp"
#include "noir/linalg.hpp"
#include "noir/probability.hpp"
#include "oracles.hpp"

using namespace noir;

namespace {

ProbabilityModel manual(VectorXd p, MatrixXd q) {
  ProbabilityModel m;
  m.p = std::move(p);
  m.Q = std::move(q);
  return m;
}

}  // namespace

TEST_CASE("sampled models satisfy the probability invariants") {
  const NoirGraph g = generate_grid(4, 5, 3, 2, 9);
  for (std::uint64_t step = 1; step <= 20; ++step) {
    const ProbabilityModel m = sample(g, 7, step, {0.1, 0.8});
    CHECK(m.p.minCoeff() >= 0.1);
    CHECK(m.p.maxCoeff() <= 0.8);
    CHECK(m.Q.minCoeff() >= 0.0);
    // columns of Q sum to at most one; the missing mass goes to outlets
    CHECK(m.Q.colwise().sum().maxCoeff() <= 1.0 + 1e-12);
    for (int r = 1; r <= g.road_count(); ++r) {
      const RoadId from{r};
      if (g.classify(from) == RoadClass::outlet) continue;
      double total = 0.0;
      for (RoadId to : g.out_neighbors(from)) total += m.q(to, from);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Q is q restricted to interior pairs
    for (Eigen::Index i = 0; i < m.Q.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.Q.cols(); ++j) {
        CHECK(m.Q(i, j) == m.q(g.interior_road(i), g.interior_road(j)));
      }
    }
    CHECK(spectral_radius(m.QP()).radius < 1.0);
  }
}

TEST_CASE("single out-neighbor gets fraction one") {
  const NoirGraph g = oracle::chain_graph(3);
  const ProbabilityModel m = sample(g, 42, 3);
  CHECK(m.q(RoadId{3}, RoadId{1}) == 1.0);
  CHECK(m.q(RoadId{4}, RoadId{3}) == 1.0);
  CHECK(m.q(RoadId{2}, RoadId{5}) == 1.0);
  CHECK(m.q(RoadId{5}, RoadId{1}) == 0.0);
  // road 5 only feeds the outlet, so its Q column is empty
  CHECK(m.Q.col(2).sum() == 0.0);
}

TEST_CASE("sampling is deterministic and keyed") {
  const NoirGraph g = generate_grid(3, 3, 2, 2, 1);
  const ProbabilityModel a = sample(g, 42, 3);
  const ProbabilityModel b = sample(g, 42, 3);
  CHECK(a.p == b.p);
  CHECK(a.Q == b.Q);
  CHECK(a.fractions == b.fractions);
  CHECK(sample(g, 42, 4).p != a.p);
  CHECK(sample(g, 43, 3).p != a.p);
  CHECK_THROWS(sample(g, 1, 1, {0.5, 0.2}));
  CHECK_THROWS(sample(g, 1, 1, {0.1, 1.0}));
}

TEST_CASE("inflow and outflow examples") {
  SUBCASE("P = 0") {
    const auto m = manual(VectorXd::Zero(2), (MatrixXd(2, 2) << 0, 0, 1, 0).finished());
    const VectorXd x = VectorXd::Constant(2, 7.0);
    CHECK(compute_inflow(m, x).isZero());
    CHECK(compute_outflow(m, x).isZero());
  }
  SUBCASE("single road") {
    const auto m = manual(VectorXd::Constant(1, 0.3), MatrixXd::Zero(1, 1));
    const VectorXd x = VectorXd::Constant(1, 10.0);
    CHECK(compute_inflow(m, x)[0] == 0.0);
    CHECK(compute_outflow(m, x)[0] == doctest::Approx(3.0));
  }
  SUBCASE("two road chain against fixed-point iteration") {
    const auto m = manual(VectorXd::Constant(2, 0.5), (MatrixXd(2, 2) << 0, 0, 1, 0).finished());
    const VectorXd x = (VectorXd(2) << 10, 0).finished();
    const VectorXd y_ref = oracle::fixed_point_inflow(m.QP(), x);
    const VectorXd y = compute_inflow(m, x);
    CHECK((y - y_ref).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[1] == doctest::Approx(5.0));
    const VectorXd z_ref = m.P() * (x + y_ref);
    const VectorXd z = compute_outflow(m, x);
    CHECK((z - z_ref).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(z[1] == doctest::Approx(2.5));
  }
}

TEST_CASE("inflow on sampled grids matches the fixed point") {
  const NoirGraph g = generate_grid(4, 4, 2, 2, 5);
  for (std::uint64_t step = 1; step <= 10; ++step) {
    const ProbabilityModel m = sample(g, 3, step);
    VectorXd x(g.interior_count());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 5.0 + static_cast<double>((i * 7) % 11);
    const VectorXd y = compute_inflow(m, x);
    const VectorXd y_ref = oracle::fixed_point_inflow(m.QP(), x, 1e-13);
    CHECK(y.minCoeff() >= 0.0);
    CHECK((y - y_ref).cwiseAbs().maxCoeff() <= 1e-9);
    const VectorXd residual = y - m.QP() * (x + y);
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(compute_outflow(m, x).minCoeff() >= 0.0);
  }
}

TEST_CASE("inflow rejects dimension mismatch and singular systems") {
  const auto m = manual(VectorXd::Constant(2, 0.5), MatrixXd::Zero(2, 2));
  CHECK_THROWS(compute_inflow(m, VectorXd::Zero(3)));
  // QP with a unit eigenvalue
  const auto bad = manual(VectorXd::Constant(2, 1.0), (MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  CHECK_THROWS_AS(compute_inflow(bad, VectorXd::Ones(2)), SingularSystemError);
}

TEST_CASE("Neumann partial sums") {
  CHECK(neumann_partial_inverse(MatrixXd::Zero(3, 3), 5) == MatrixXd::Identity(3, 3));
  CHECK(neumann_partial_inverse(MatrixXd::Constant(1, 1, 0.5), 3)(0, 0) == doctest::Approx(1.875));
  const NoirGraph g = generate_grid(3, 3, 2, 2, 2);
  const MatrixXd qp = sample(g, 1, 1).QP();
  const auto series = neumann_series(qp, 1e-12, 100000);
  REQUIRE(series.converged);
  const MatrixXd ref = (MatrixXd::Identity(qp.rows(), qp.rows()) - qp).lu().inverse();
  CHECK((series.sum - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
  for (std::size_t h = 1; h < series.increments.size(); ++h) CHECK(series.increments[h] <= series.increments[h - 1] + 1e-15);
}
