#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "noir/graph.hpp"
#include "noir/types.hpp"

namespace noir {

struct SpectralOptions {
  double tolerance = 1e-10;
  int max_iterations = 20000;
};

enum class SpectralMethod {
  collatz_wielandt,  ///< certified bracket for nonnegative matrices
  power,             ///< plain power iteration
  schur              ///< dense eigenvalue fallback
};

template <typename Scalar>
struct SpectralEstimate {
  Scalar radius = 0;
  /// Certified bracket when method == collatz_wielandt, otherwise radius/radius.
  Scalar lower = 0;
  Scalar upper = 0;
  int iterations = 0;
  SpectralMethod method = SpectralMethod::power;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const { return best_estimate_; }

 private:
  double best_estimate_;
};

namespace detail {

// Collatz-Wielandt iteration on M + I. For v > 0 every ratio (Mv)_i / v_i
// brackets rho(M); the shift keeps v strictly positive even when M has zero
// rows and removes periodicity.
template <typename Derived>
bool collatz_wielandt(const Eigen::MatrixBase<Derived>& m, const SpectralOptions& opts,
                      SpectralEstimate<typename Derived::Scalar>& est) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  Vector<Scalar> v = Vector<Scalar>::Ones(n);
  Vector<Scalar> w(n);
  Scalar best_width = std::numeric_limits<Scalar>::infinity();
  int since_progress = 0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    w.noalias() = m * v;
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar ratio = w[i] / v[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    est.lower = std::max(Scalar(0), lo);
    est.upper = hi;
    est.radius = (est.lower + est.upper) / 2;
    est.iterations = it;
    const Scalar width = hi - lo;
    if (width <= Scalar(opts.tolerance) * std::max(Scalar(1), hi)) return true;
    // Reducible matrices can leave the bracket open forever.
    if (width < best_width * Scalar(0.999)) {
      best_width = width;
      since_progress = 0;
    } else if (++since_progress > 200) {
      return false;
    }
    v = (w + v) / (w + v).maxCoeff();
  }
  return false;
}

template <typename Derived>
bool power_iteration(const Eigen::MatrixBase<Derived>& m, const SpectralOptions& opts,
                     SpectralEstimate<typename Derived::Scalar>& est) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  // Fixed, non-symmetric start so that no eigenvector is missed by symmetry.
  Vector<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(1) + Scalar(i) / Scalar(n + 1);
  v.normalize();
  Scalar prev = -1;
  int stable = 0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Vector<Scalar> w = m * v;
    const Scalar norm = w.norm();
    est.radius = est.lower = est.upper = norm;
    est.iterations = it;
    if (norm == Scalar(0)) return true;
    if (std::abs(norm - prev) <= Scalar(opts.tolerance) * std::max(Scalar(1), norm)) {
      if (++stable >= 5) return true;
    } else {
      stable = 0;
    }
    prev = norm;
    v = w / norm;
  }
  return false;
}

}  // namespace detail

/// Largest eigenvalue modulus.
///
/// Nonnegative matrices use a Collatz-Wielandt bracket, others plain power
/// iteration; both fall back to a dense Schur decomposition when the
/// iteration does not settle (reducible or complex-dominant spectra).
template <typename Derived>
SpectralEstimate<typename Derived::Scalar> spectral_radius(const Eigen::MatrixBase<Derived>& m,
                                                           const SpectralOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw Error("spectral_radius needs a square matrix");
  SpectralEstimate<Scalar> est;
  if (m.rows() == 0) return est;

  const bool nonnegative = (m.array() >= Scalar(0)).all();
  if (nonnegative) {
    est.method = SpectralMethod::collatz_wielandt;
    if (detail::collatz_wielandt(m, opts, est)) return est;
  } else {
    est.method = SpectralMethod::power;
    if (detail::power_iteration(m, opts, est)) return est;
  }

  const double best = static_cast<double>(est.radius);
  Eigen::EigenSolver<Matrix<Scalar>> solver(m.eval(), /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("spectral radius did not converge", best);
  }
  est.radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  est.lower = est.upper = est.radius;
  est.method = SpectralMethod::schur;
  return est;
}

/// Partial Neumann sum I + M + M^2 + ... + M^terms.
template <typename Derived>
Matrix<typename Derived::Scalar> neumann_partial_inverse(const Eigen::MatrixBase<Derived>& m,
                                                         int terms) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  Matrix<Scalar> sum = Matrix<Scalar>::Identity(n, n);
  Matrix<Scalar> power = Matrix<Scalar>::Identity(n, n);
  for (int h = 1; h <= terms; ++h) {
    power = (power * m).eval();
    sum += power;
  }
  return sum;
}

template <typename Scalar>
struct NeumannSeries {
  Matrix<Scalar> sum;
  /// Infinity norm of each added power M^h, h = 1, 2, ...
  std::vector<Scalar> increments;
  bool converged = false;
};

/// Grows the Neumann series until the added term falls below `increment_tol`
/// in the infinity norm.
template <typename Derived>
NeumannSeries<typename Derived::Scalar> neumann_series(const Eigen::MatrixBase<Derived>& m,
                                                       double increment_tol, int max_terms) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  NeumannSeries<Scalar> out;
  out.sum = Matrix<Scalar>::Identity(n, n);
  Matrix<Scalar> power = Matrix<Scalar>::Identity(n, n);
  for (int h = 1; h <= max_terms; ++h) {
    power = (power * m).eval();
    out.sum += power;
    const Scalar inc = power.cwiseAbs().rowwise().sum().maxCoeff();
    out.increments.push_back(inc);
    if (inc < Scalar(increment_tol)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace noir
