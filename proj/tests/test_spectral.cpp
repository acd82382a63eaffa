#include <doctest.h>

#include "noir/linalg.hpp"
#include "noir/probability.hpp"
#include "noir/state_space.hpp"
#include "oracles.hpp"

using namespace noir;

TEST_CASE("spectral radius of simple matrices") {
  CHECK(spectral_radius(MatrixXd::Identity(3, 3)).radius == doctest::Approx(1.0).epsilon(1e-10));
  const MatrixXd d = VectorXd((VectorXd(2) << 0.2, 0.7).finished()).asDiagonal();
  CHECK(spectral_radius(d).radius == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(spectral_radius(MatrixXd::Zero(4, 4)).radius == 0.0);
  CHECK(spectral_radius(MatrixXd(0, 0)).radius == 0.0);
  CHECK_THROWS(spectral_radius(MatrixXd::Zero(2, 3)));
}

TEST_CASE("nilpotent and rotation-like matrices fall back correctly") {
  // strictly lower triangular: reducible, radius 0
  MatrixXd n = MatrixXd::Zero(3, 3);
  n(1, 0) = 1;
  n(2, 1) = 1;
  CHECK(spectral_radius(n).radius == doctest::Approx(0.0));
  // rotation by 90 degrees scaled by 0.9: complex pair of modulus 0.9
  const MatrixXd r = (MatrixXd(2, 2) << 0, -0.9, 0.9, 0).finished();
  CHECK(spectral_radius(r).radius == doctest::Approx(0.9).epsilon(1e-8));
}

TEST_CASE("Collatz-Wielandt bracket contains the radius") {
  const MatrixXd m = (MatrixXd(3, 3) << 0.1, 0.4, 0.0, 0.3, 0.2, 0.5, 0.2, 0.1, 0.3).finished();
  const auto est = spectral_radius(m);
  const double ref = oracle::char_poly_radius(m);
  CHECK(est.method == SpectralMethod::collatz_wielandt);
  CHECK(est.lower <= ref + 1e-12);
  CHECK(est.upper >= ref - 1e-12);
  CHECK(est.radius == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("sampled A and QP agree with characteristic polynomial roots") {
  // small enough for the polynomial oracle
  const NoirGraph g = oracle::chain_graph(4);
  REQUIRE(g.interior_count() <= 4);
  for (std::uint64_t step = 1; step <= 25; ++step) {
    const ProbabilityModel m = sample(g, 11, step);
    const StateSpace<double> ss = assemble(g, m);
    const double ra = spectral_radius(ss.A).radius;
    CHECK(ra < 1.0);
    CHECK(ra == doctest::Approx(oracle::char_poly_radius(ss.A)).epsilon(1e-7));
    CHECK(spectral_radius(m.QP()).radius == doctest::Approx(oracle::char_poly_radius(m.QP())).epsilon(1e-7));
  }
}

TEST_CASE("random 4x4 nonnegative matrices") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    MatrixXd m(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) m.data()[i] = u(rng) < 0.4 ? 0.0 : u(rng);
    CHECK(spectral_radius(m).radius ==
          doctest::Approx(oracle::char_poly_radius(m)).epsilon(1e-7).scale(1.0));
  }
}
