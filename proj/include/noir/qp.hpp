#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "noir/graph.hpp"
#include "noir/types.hpp"

namespace noir {

/// min 1/2 U^T W1 U + W2^T U  s.t.  A_ineq U + b_ineq <= 0,  A_eq U + b_eq = 0.
template <typename Scalar>
struct QpProblem {
  Matrix<Scalar> W1;
  Vector<Scalar> W2;
  Matrix<Scalar> A_ineq;
  Vector<Scalar> b_ineq;
  Matrix<Scalar> A_eq;
  Vector<Scalar> b_eq;

  Eigen::Index dim() const { return W2.size(); }
  Scalar objective(const Vector<Scalar>& u) const { return Scalar(0.5) * u.dot(W1 * u) + W2.dot(u); }
};

enum class QpStatus { optimal, infeasible, max_iter };

inline const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::infeasible:
      return "infeasible";
    case QpStatus::max_iter:
      return "max_iter";
  }
  return "unknown";
}

/// Scaled KKT residuals, infinity norms. Each residual is divided by one plus
/// the magnitude of the terms it compares, so the same tolerance applies to
/// problems in vehicles or in vehicles squared.
template <typename Scalar>
struct KktResiduals {
  Scalar stationarity = 0;
  Scalar primal_equality = 0;
  Scalar primal_inequality = 0;
  Scalar complementarity = 0;
  Scalar dual_feasibility = 0;

  Scalar max() const {
    return std::max({stationarity, primal_equality, primal_inequality, complementarity,
                     dual_feasibility});
  }
};

/// Farkas certificate: y >= 0, A_ineq^T y + A_eq^T w = 0 and
/// b_ineq^T y + b_eq^T w = gap > 0 together rule out any feasible U.
template <typename Scalar>
struct InfeasibilityCertificate {
  Vector<Scalar> y_ineq;
  Vector<Scalar> w_eq;
  Scalar gap = 0;
  /// Inequality that could not be satisfied when infeasibility was detected.
  Eigen::Index violated = -1;
};

template <typename Scalar>
struct QpSolution {
  Vector<Scalar> u_star;
  Scalar objective = 0;
  QpStatus status = QpStatus::max_iter;
  KktResiduals<Scalar> kkt;
  int iterations = 0;
  Vector<Scalar> lambda_ineq;  ///< multipliers, >= 0
  Vector<Scalar> nu_eq;
  std::vector<Eigen::Index> active_set;  ///< active inequality rows
  std::optional<InfeasibilityCertificate<Scalar>> certificate;
};

struct QpOptions {
  double kkt_tolerance = 1e-8;
  int max_iterations = 100000;
  /// Relative violation below which an inequality counts as satisfied.
  double feasibility_epsilon = 1e-12;
};

class QpDimensionError : public Error {
 public:
  using Error::Error;
};

class QpNotConvexError : public Error {
 public:
  QpNotConvexError(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

template <typename Scalar>
void check_dimensions(const QpProblem<Scalar>& p) {
  const Eigen::Index n = p.dim();
  auto fail = [](const std::string& what) { throw QpDimensionError("QP dimension mismatch: " + what); };
  if (p.W1.rows() != n || p.W1.cols() != n) fail("W1 must be n x n");
  if (p.A_ineq.rows() != p.b_ineq.size()) fail("A_ineq rows vs b_ineq");
  if (p.A_ineq.rows() > 0 && p.A_ineq.cols() != n) fail("A_ineq columns");
  if (p.A_eq.rows() != p.b_eq.size()) fail("A_eq rows vs b_eq");
  if (p.A_eq.rows() > 0 && p.A_eq.cols() != n) fail("A_eq columns");
}

namespace detail {

template <typename Scalar>
Scalar inf_norm(const Vector<Scalar>& v) {
  return v.size() == 0 ? Scalar(0) : v.template lpNorm<Eigen::Infinity>();
}

template <typename Scalar>
Vector<Scalar> rows_times(const Matrix<Scalar>& a, const Vector<Scalar>& u) {
  return a.rows() == 0 ? Vector<Scalar>() : Vector<Scalar>(a * u);
}

template <typename Scalar>
Vector<Scalar> transpose_times(const Matrix<Scalar>& a, const Vector<Scalar>& y, Eigen::Index n) {
  return a.rows() == 0 ? Vector<Scalar>::Zero(n) : Vector<Scalar>(a.transpose() * y);
}

}  // namespace detail

/// KKT residuals of `u` with the given multipliers.
template <typename Scalar>
KktResiduals<Scalar> check_kkt(const QpProblem<Scalar>& p, const Vector<Scalar>& u,
                               const Vector<Scalar>& lambda, const Vector<Scalar>& nu) {
  check_dimensions(p);
  using detail::inf_norm;
  const Eigen::Index n = p.dim();
  if (u.size() != n || lambda.size() != p.b_ineq.size() || nu.size() != p.b_eq.size()) {
    throw QpDimensionError("check_kkt: vector sizes do not match the problem");
  }
  KktResiduals<Scalar> r;
  const Vector<Scalar> w1u = p.W1 * u;
  const Vector<Scalar> ineq_term = detail::transpose_times(p.A_ineq, lambda, n);
  const Vector<Scalar> eq_term = detail::transpose_times(p.A_eq, nu, n);
  const Vector<Scalar> grad = w1u + p.W2 + ineq_term + eq_term;
  r.stationarity = inf_norm(grad) / (1 + std::max({inf_norm(w1u), inf_norm(p.W2),
                                                   inf_norm(ineq_term), inf_norm(eq_term)}));

  const Vector<Scalar> au_eq = detail::rows_times(p.A_eq, u);
  if (au_eq.size() > 0) {
    r.primal_equality = inf_norm(Vector<Scalar>(au_eq + p.b_eq)) /
                        (1 + std::max(inf_norm(au_eq), inf_norm(p.b_eq)));
  }
  const Vector<Scalar> au = detail::rows_times(p.A_ineq, u);
  if (au.size() > 0) {
    const Vector<Scalar> g = au + p.b_ineq;
    const Scalar scale = 1 + std::max(inf_norm(au), inf_norm(p.b_ineq));
    r.primal_inequality = std::max(Scalar(0), g.maxCoeff()) / scale;
    const Scalar lambda_norm = inf_norm(lambda);
    r.complementarity = lambda.cwiseProduct(g).cwiseAbs().maxCoeff() / ((1 + lambda_norm) * scale);
    r.dual_feasibility = std::max(Scalar(0), -lambda.minCoeff()) / (1 + lambda_norm);
  }
  return r;
}

/// KKT residuals of `u` alone. Multipliers are recovered by least squares over
/// the inequalities active at `u` and all equalities.
template <typename Scalar>
KktResiduals<Scalar> check_kkt(const QpProblem<Scalar>& p, const Vector<Scalar>& u) {
  check_dimensions(p);
  const Eigen::Index n = p.dim();
  if (u.size() != n) throw QpDimensionError("check_kkt: u has the wrong size");
  const Eigen::Index m_in = p.b_ineq.size();
  const Eigen::Index m_eq = p.b_eq.size();

  std::vector<Eigen::Index> active;
  if (m_in > 0) {
    const Vector<Scalar> au = p.A_ineq * u;
    const Scalar scale = 1 + std::max(detail::inf_norm(au), detail::inf_norm(p.b_ineq));
    for (Eigen::Index i = 0; i < m_in; ++i) {
      if (au[i] + p.b_ineq[i] >= -Scalar(1e-9) * scale) active.push_back(i);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(active.size()) + m_eq;
  Vector<Scalar> lambda = Vector<Scalar>::Zero(m_in);
  Vector<Scalar> nu = Vector<Scalar>::Zero(m_eq);
  if (k > 0) {
    Matrix<Scalar> normals(n, k);
    for (std::size_t a = 0; a < active.size(); ++a) normals.col(a) = p.A_ineq.row(active[a]).transpose();
    if (m_eq > 0) normals.rightCols(m_eq) = p.A_eq.transpose();
    const Vector<Scalar> rhs = -(p.W1 * u + p.W2);
    Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(normals);
    const Vector<Scalar> mult = cod.solve(rhs);
    for (std::size_t a = 0; a < active.size(); ++a) lambda[active[a]] = mult[a];
    if (m_eq > 0) nu = mult.tail(m_eq);
  }
  return check_kkt(p, u, lambda, nu);
}

namespace detail {

// Dual active-set method of Goldfarb and Idnani for strictly convex QPs.
// Constraints are handled in the form N^T x + c >= 0 (inequalities) and
// N^T x + c = 0 (equalities); the factor J = L^-T Q and the triangular R
// are updated with Givens rotations as constraints enter and leave.
template <typename Scalar>
class DualActiveSet {
 public:
  DualActiveSet(const QpProblem<Scalar>& p, const QpOptions& opts) : p_(p), opts_(opts) {
    n_ = p.dim();
    m_eq_ = p.b_eq.size();
    m_in_ = p.b_ineq.size();
  }

  QpSolution<Scalar> run(const std::vector<char>& preferred) {
    QpSolution<Scalar> sol;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();

    Eigen::LLT<Matrix<Scalar>> llt(p_.W1);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(p_.W1, Eigen::EigenvaluesOnly);
      const double min_eig = static_cast<double>(es.eigenvalues().minCoeff());
      throw QpNotConvexError("W1 is not positive definite (smallest eigenvalue " +
                                 std::to_string(min_eig) + ")",
                             min_eig);
    }
    const Matrix<Scalar> lower = llt.matrixL();
    J_ = lower.transpose().template triangularView<Eigen::Upper>().solve(
        Matrix<Scalar>::Identity(n_, n_));
    R_ = Matrix<Scalar>::Zero(n_, n_);
    r_norm_ = 1;
    iq_ = 0;
    active_.assign(n_ + 1, -1);
    u_ = Vector<Scalar>::Zero(n_ + 1);
    x_ = llt.solve(-p_.W2);

    // Equalities enter first with a full step each.
    for (Eigen::Index e = 0; e < m_eq_; ++e) {
      const Vector<Scalar> np = p_.A_eq.row(e).transpose();
      compute_step(np);
      const Scalar znp = z_.dot(np);
      const Scalar s = np.dot(x_) + p_.b_eq[e];
      if (std::abs(znp) <= eps * (1 + np.norm())) {
        // Dependent on equalities already active: consistent or not.
        if (std::abs(s) > 1e-9 * (1 + std::abs(p_.b_eq[e]) + np.norm() * x_.norm())) {
          return infeasible_equality(sol, e);
        }
        continue;
      }
      const Scalar t = -s / znp;
      x_ += t * z_;
      u_[iq_] = t;
      u_.head(iq_) -= t * r_.head(iq_);
      active_[iq_] = encode_eq(e);
      if (!add_constraint()) throw Error("QP equality constraints are linearly dependent");
    }
    eq_active_ = iq_;

    std::vector<char> excluded(m_in_, 0);
    std::vector<char> is_active(m_in_, 0);
    int iterations = 0;
    while (true) {
      if (++iterations > opts_.max_iterations) {
        sol.status = QpStatus::max_iter;
        break;
      }
      const Eigen::Index ip = most_violated(is_active, excluded, preferred);
      if (ip < 0) {
        sol.status = QpStatus::optimal;
        break;
      }

      const Vector<Scalar> np = -p_.A_ineq.row(ip).transpose();
      Scalar s_ip = np.dot(x_) - p_.b_ineq[ip];
      u_[iq_] = 0;
      active_[iq_] = ip;

      while (true) {
        if (++iterations > opts_.max_iterations) break;
        compute_step(np);
        // Largest dual step keeping inequality multipliers nonnegative.
        Scalar t1 = std::numeric_limits<Scalar>::infinity();
        Eigen::Index leave = -1;
        for (Eigen::Index k = eq_active_; k < iq_; ++k) {
          if (r_[k] > 0 && u_[k] / r_[k] < t1) {
            t1 = u_[k] / r_[k];
            leave = active_[k];
          }
        }
        const Scalar znp = z_.dot(np);
        // Same threshold add_constraint uses to reject a dependent normal.
        const bool primal_move = d_.tail(n_ - iq_).norm() > eps * r_norm_ * 10 && znp > 0;
        const Scalar t2 = primal_move ? -s_ip / znp : std::numeric_limits<Scalar>::infinity();
        const Scalar t = std::min(t1, t2);

        if (!std::isfinite(t)) {
          sol.iterations = iterations;
          return infeasible(sol, ip);
        }
        if (!primal_move) {
          u_.head(iq_) -= t * r_.head(iq_);
          u_[iq_] += t;
          is_active[leave] = 0;
          delete_constraint(leave);
          continue;
        }
        x_ += t * z_;
        u_.head(iq_) -= t * r_.head(iq_);
        u_[iq_] += t;
        if (t == t2) {
          if (!add_constraint()) {
            // Numerically dependent on the active set: skip this constraint.
            // The rejected rotations only mixed null-space columns of J; the
            // final KKT check catches any stationarity lost here.
            excluded[ip] = 1;
            u_[iq_] = 0;
            active_[iq_] = -1;
            break;
          }
          is_active[ip] = 1;
          break;
        }
        is_active[leave] = 0;
        delete_constraint(leave);
        s_ip = np.dot(x_) - p_.b_ineq[ip];
      }
      if (iterations > opts_.max_iterations) {
        sol.status = QpStatus::max_iter;
        break;
      }
    }

    sol.iterations = iterations;
    sol.u_star = x_;
    sol.objective = p_.objective(x_);
    sol.lambda_ineq = Vector<Scalar>::Zero(m_in_);
    sol.nu_eq = Vector<Scalar>::Zero(m_eq_);
    for (Eigen::Index k = 0; k < iq_; ++k) {
      const Eigen::Index id = active_[k];
      if (is_eq(id)) {
        sol.nu_eq[decode_eq(id)] = -u_[k];
      } else {
        sol.lambda_ineq[id] = u_[k];
        sol.active_set.push_back(id);
      }
    }
    std::sort(sol.active_set.begin(), sol.active_set.end());
    return sol;
  }

 private:
  // Active-set ids: inequalities keep their row index, equalities are
  // stored as -(e + 2) so that -1 stays free as "empty".
  static Eigen::Index encode_eq(Eigen::Index e) { return -(e + 2); }
  static bool is_eq(Eigen::Index id) { return id <= -2; }
  static Eigen::Index decode_eq(Eigen::Index id) { return -id - 2; }

  Vector<Scalar> normal_of(Eigen::Index id) const {
    if (is_eq(id)) return p_.A_eq.row(decode_eq(id)).transpose();
    return -p_.A_ineq.row(id).transpose();
  }

  void compute_step(const Vector<Scalar>& np) {
    d_ = J_.transpose() * np;
    z_ = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_);
    r_ = Vector<Scalar>::Zero(n_ + 1);
    if (iq_ > 0) {
      r_.head(iq_) =
          R_.topLeftCorner(iq_, iq_).template triangularView<Eigen::Upper>().solve(d_.head(iq_));
    }
  }

  Eigen::Index most_violated(const std::vector<char>& is_active, const std::vector<char>& excluded,
                             const std::vector<char>& preferred) const {
    if (m_in_ == 0) return -1;
    const Vector<Scalar> g = p_.A_ineq * x_ + p_.b_ineq;
    const Scalar x_scale = detail::inf_norm(x_);
    Eigen::Index best = -1, best_preferred = -1;
    Scalar worst = 0, worst_preferred = 0;
    for (Eigen::Index i = 0; i < m_in_; ++i) {
      if (is_active[i] || excluded[i] || g[i] <= 0) continue;
      const Scalar row_norm = p_.A_ineq.row(i).template lpNorm<Eigen::Infinity>();
      const Scalar tol = Scalar(opts_.feasibility_epsilon) *
                         (1 + std::abs(p_.b_ineq[i]) + row_norm * x_scale);
      if (g[i] <= tol) continue;
      const Scalar score = g[i] / (row_norm > 0 ? row_norm : Scalar(1));
      if (score > worst) {
        worst = score;
        best = i;
      }
      if (!preferred.empty() && preferred[i] && score > worst_preferred) {
        worst_preferred = score;
        best_preferred = i;
      }
    }
    return best_preferred >= 0 ? best_preferred : best;
  }

  static Scalar hypot(Scalar a, Scalar b) { return std::hypot(a, b); }

  bool add_constraint() {
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    for (Eigen::Index j = n_ - 1; j >= iq_ + 1; --j) {
      Scalar cc = d_[j - 1];
      Scalar ss = d_[j];
      const Scalar h = hypot(cc, ss);
      if (h == Scalar(0)) continue;
      d_[j] = 0;
      ss /= h;
      cc /= h;
      if (cc < 0) {
        cc = -cc;
        ss = -ss;
        d_[j - 1] = -h;
      } else {
        d_[j - 1] = h;
      }
      const Scalar xny = ss / (1 + cc);
      for (Eigen::Index k = 0; k < n_; ++k) {
        const Scalar t1 = J_(k, j - 1);
        const Scalar t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d_.head(iq_);
    if (std::abs(d_[iq_ - 1]) <= eps * r_norm_ * 10) {
      --iq_;
      R_.col(iq_).setZero();
      return false;
    }
    r_norm_ = std::max(r_norm_, std::abs(d_[iq_ - 1]));
    return true;
  }

  void delete_constraint(Eigen::Index id) {
    Eigen::Index qq = -1;
    for (Eigen::Index k = eq_active_; k < iq_; ++k) {
      if (active_[k] == id) {
        qq = k;
        break;
      }
    }
    if (qq < 0) throw Error("QP internal error: constraint to drop is not active");
    for (Eigen::Index k = qq; k < iq_ - 1; ++k) {
      active_[k] = active_[k + 1];
      u_[k] = u_[k + 1];
      R_.col(k) = R_.col(k + 1);
    }
    active_[iq_ - 1] = active_[iq_];
    u_[iq_ - 1] = u_[iq_];
    active_[iq_] = -1;
    u_[iq_] = 0;
    R_.col(iq_ - 1).setZero();
    --iq_;
    if (iq_ == 0) return;
    for (Eigen::Index j = qq; j < iq_; ++j) {
      Scalar cc = R_(j, j);
      Scalar ss = R_(j + 1, j);
      const Scalar h = hypot(cc, ss);
      if (h == Scalar(0)) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0;
      if (cc < 0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const Scalar xny = ss / (1 + cc);
      for (Eigen::Index k = j + 1; k < iq_; ++k) {
        const Scalar t1 = R_(j, k);
        const Scalar t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n_; ++k) {
        const Scalar t1 = J_(k, j);
        const Scalar t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  QpSolution<Scalar> infeasible(QpSolution<Scalar>& sol, Eigen::Index ip) {
    InfeasibilityCertificate<Scalar> cert;
    cert.violated = ip;
    cert.y_ineq = Vector<Scalar>::Zero(m_in_);
    cert.w_eq = Vector<Scalar>::Zero(m_eq_);
    cert.y_ineq[ip] = 1;
    for (Eigen::Index k = 0; k < iq_; ++k) {
      const Eigen::Index id = active_[k];
      if (is_eq(id)) {
        cert.w_eq[decode_eq(id)] = r_[k];
      } else {
        cert.y_ineq[id] = -r_[k];
      }
    }
    cert.gap = cert.y_ineq.dot(p_.b_ineq) + (m_eq_ > 0 ? cert.w_eq.dot(p_.b_eq) : Scalar(0));
    sol.status = QpStatus::infeasible;
    sol.certificate = std::move(cert);
    sol.u_star = x_;
    sol.objective = p_.objective(x_);
    sol.lambda_ineq = Vector<Scalar>::Zero(m_in_);
    sol.nu_eq = Vector<Scalar>::Zero(m_eq_);
    for (Eigen::Index k = eq_active_; k < iq_; ++k) sol.active_set.push_back(active_[k]);
    std::sort(sol.active_set.begin(), sol.active_set.end());
    return sol;
  }

  QpSolution<Scalar> infeasible_equality(QpSolution<Scalar>& sol, Eigen::Index e) {
    // A_eq row e is a combination of earlier rows with an inconsistent offset.
    InfeasibilityCertificate<Scalar> cert;
    cert.y_ineq = Vector<Scalar>::Zero(m_in_);
    cert.w_eq = Vector<Scalar>::Zero(m_eq_);
    const Vector<Scalar> np = p_.A_eq.row(e).transpose();
    compute_step(np);
    cert.w_eq[e] = 1;
    for (Eigen::Index k = 0; k < iq_; ++k) cert.w_eq[decode_eq(active_[k])] = -r_[k];
    cert.gap = cert.w_eq.dot(p_.b_eq);
    if (cert.gap < 0) {
      cert.w_eq = -cert.w_eq;
      cert.gap = -cert.gap;
    }
    sol.status = QpStatus::infeasible;
    sol.certificate = std::move(cert);
    sol.u_star = x_;
    sol.objective = p_.objective(x_);
    sol.lambda_ineq = Vector<Scalar>::Zero(m_in_);
    sol.nu_eq = Vector<Scalar>::Zero(m_eq_);
    return sol;
  }

  const QpProblem<Scalar>& p_;
  QpOptions opts_;
  Eigen::Index n_ = 0, m_eq_ = 0, m_in_ = 0;
  Eigen::Index iq_ = 0, eq_active_ = 0;
  Matrix<Scalar> J_, R_;
  Vector<Scalar> x_, u_, d_, z_, r_;
  Scalar r_norm_ = 1;
  std::vector<Eigen::Index> active_;
};

}  // namespace detail

/// Solves a strictly convex QP with a dual active-set method.
///
/// `initial_guess` only reorders which violated constraints are examined
/// first (those active at the guess); the result does not depend on it.
template <typename Scalar>
QpSolution<Scalar> solve(const QpProblem<Scalar>& p, const QpOptions& opts = {},
                         const Vector<Scalar>* initial_guess = nullptr) {
  check_dimensions(p);
  std::vector<char> preferred;
  if (initial_guess != nullptr && initial_guess->size() == p.dim() && p.b_ineq.size() > 0) {
    const Vector<Scalar> g = p.A_ineq * *initial_guess + p.b_ineq;
    const Scalar scale = 1 + detail::inf_norm(p.b_ineq);
    preferred.resize(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) preferred[i] = std::abs(g[i]) <= Scalar(1e-6) * scale;
  }
  detail::DualActiveSet<Scalar> solver(p, opts);
  QpSolution<Scalar> sol = solver.run(preferred);
  if (sol.status == QpStatus::optimal) {
    sol.kkt = check_kkt(p, sol.u_star, sol.lambda_ineq, sol.nu_eq);
    if (sol.kkt.max() > Scalar(opts.kkt_tolerance)) sol.status = QpStatus::max_iter;
  }
  return sol;
}

}  // namespace noir
