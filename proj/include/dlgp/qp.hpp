#pragma once

// Dense convex quadratic programming by a primal active-set method.
//
//   minimize    1/2 v'Qv + q'v + constant
//   subject to  A_in v >= b_in,   A_eq v = b_eq
//
// Equalities are eliminated up front (least-squares particular solution plus
// an SVD null-space basis, so rank-deficient blocks are fine). A phase-1 LP
// run through the same active-set core produces a feasible start or a Farkas
// certificate. Q only needs to be positive semidefinite: zero-curvature
// directions are followed as rays, which is how unboundedness is detected.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dlgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kQpFeasibilityTol = 1e-9;
inline constexpr double kQpStationarityTol = 1e-8;
inline constexpr double kQpTieTol = 1e-10;

class QpError : public std::runtime_error {
 public:
  enum class Code { kDimensionMismatch, kNotPsd };
  QpError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct QpProblem {
  MatrixXd Q;
  VectorXd q;
  double constant = 0.0;
  MatrixXd A_in;
  VectorXd b_in;
  MatrixXd A_eq;
  VectorXd b_eq;

  /// Unconstrained problem with `n` variables and a zero objective.
  static QpProblem with_size(int n) {
    QpProblem p;
    p.Q = MatrixXd::Zero(n, n);
    p.q = VectorXd::Zero(n);
    p.A_in.resize(0, n);
    p.A_eq.resize(0, n);
    return p;
  }

  int num_vars() const { return static_cast<int>(q.size()); }

  double objective(const VectorXd& v) const {
    return 0.5 * v.dot(Q * v) + q.dot(v) + constant;
  }

  void add_inequality(const VectorXd& row, double rhs) {
    A_in.conservativeResize(A_in.rows() + 1, num_vars());
    A_in.row(A_in.rows() - 1) = row.transpose();
    b_in.conservativeResize(b_in.size() + 1);
    b_in(b_in.size() - 1) = rhs;
  }

  void add_equality(const VectorXd& row, double rhs) {
    A_eq.conservativeResize(A_eq.rows() + 1, num_vars());
    A_eq.row(A_eq.rows() - 1) = row.transpose();
    b_eq.conservativeResize(b_eq.size() + 1);
    b_eq(b_eq.size() - 1) = rhs;
  }
};

enum class QpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kUnbounded: return "unbounded";
    case QpStatus::kIterationLimit: return "iteration_limit";
  }
  return "?";
}

struct QpSolution {
  QpStatus status = QpStatus::kInfeasible;
  VectorXd v;
  double objective = std::numeric_limits<double>::infinity();
  // Indices of inequality rows held active at the solution.
  std::vector<int> active_set;
  // Multipliers (optimal only): Qv + q = A_in' lambda_in + A_eq' mu_eq.
  VectorXd lambda_in;
  VectorXd mu_eq;
  // Farkas certificate (infeasible only): y_in >= 0 with
  // A_in' y_in + A_eq' y_eq = 0 and b_in' y_in + b_eq' y_eq > 0.
  VectorXd farkas_in;
  VectorXd farkas_eq;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::kOptimal; }
};

/// Infinity norm of Qv + q - A_in' lambda_in - A_eq' mu_eq.
inline double kkt_stationarity_residual(const QpProblem& p,
                                        const QpSolution& s) {
  VectorXd r = p.Q * s.v + p.q;
  if (p.A_in.rows() > 0) r -= p.A_in.transpose() * s.lambda_in;
  if (p.A_eq.rows() > 0) r -= p.A_eq.transpose() * s.mu_eq;
  return r.size() == 0 ? 0.0 : r.lpNorm<Eigen::Infinity>();
}

/// Largest violation of any constraint at v (0 when feasible).
inline double primal_violation(const QpProblem& p, const VectorXd& v) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.A_in.rows(); ++i) {
    worst = std::max(worst, p.b_in(i) - p.A_in.row(i).dot(v));
  }
  for (Eigen::Index i = 0; i < p.A_eq.rows(); ++i) {
    worst = std::max(worst, std::abs(p.b_eq(i) - p.A_eq.row(i).dot(v)));
  }
  return worst;
}

namespace detail {

// Result of the inequality-only active-set core.
struct CoreResult {
  QpStatus status = QpStatus::kIterationLimit;
  VectorXd x;
  std::vector<int> working;
  VectorXd lambda;  // one entry per row of G
  int iterations = 0;
};

// Orthonormal basis of the null space of the rows of `a` (k x n).
inline MatrixXd null_space_of_rows(const MatrixXd& a, int n) {
  if (a.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::HouseholderQR<MatrixXd> qr(a.transpose());
  const MatrixXd q_full = qr.householderQ() * MatrixXd::Identity(n, n);
  const int k = static_cast<int>(a.rows());
  return q_full.rightCols(n - k);
}

// Least-squares multipliers for a_w' lambda = grad.
inline VectorXd working_multipliers(const MatrixXd& a_w, const VectorXd& grad) {
  if (a_w.rows() == 0) return VectorXd();
  return a_w.transpose().colPivHouseholderQr().solve(grad);
}

// Primal active-set iterations for min 1/2 x'Hx + g'x s.t. G x >= h, starting
// from a point feasible within kQpFeasibilityTol.
inline CoreResult active_set_core(const MatrixXd& H, const VectorXd& g,
                                  const MatrixXd& G, const VectorXd& h,
                                  VectorXd x, int max_iterations) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(G.rows());
  CoreResult out;

  std::vector<double> row_norm(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) row_norm[i] = std::max(G.row(i).norm(), 1e-300);

  // Initial working set: constraints active at x, kept linearly independent.
  std::vector<int> working;
  {
    MatrixXd rows(0, n);
    for (int i = 0; i < m; ++i) {
      const double slack = G.row(i).dot(x) - h(i);
      if (std::abs(slack) > kQpFeasibilityTol) continue;
      if (static_cast<int>(working.size()) >= n) break;
      MatrixXd trial(rows.rows() + 1, n);
      trial << rows, G.row(i);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(trial);
      qr.setThreshold(1e-10);
      if (qr.rank() == trial.rows()) {
        rows = trial;
        working.push_back(i);
      }
    }
  }

  int degenerate_steps = 0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    out.iterations = iter + 1;
    const int k = static_cast<int>(working.size());
    MatrixXd a_w(k, n);
    for (int j = 0; j < k; ++j) a_w.row(j) = G.row(working[j]);

    const VectorXd grad = H * x + g;
    VectorXd p = VectorXd::Zero(n);
    bool ray = false;

    if (k < n) {
      const MatrixXd Z = null_space_of_rows(a_w, n);
      const VectorXd rg = Z.transpose() * grad;
      const MatrixXd Hr = Z.transpose() * H * Z;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Hr);
      const VectorXd& evals = eig.eigenvalues();
      const MatrixXd& evecs = eig.eigenvectors();
      const double curv_scale = std::max(1.0, H.cwiseAbs().maxCoeff());
      const double curv_tol = 1e-11 * curv_scale;

      VectorXd coeff = evecs.transpose() * rg;
      VectorXd d_zero = VectorXd::Zero(Z.cols());
      VectorXd d_newton = VectorXd::Zero(Z.cols());
      for (int j = 0; j < evals.size(); ++j) {
        if (evals(j) <= curv_tol) {
          d_zero -= coeff(j) * evecs.col(j);
        } else {
          d_newton -= (coeff(j) / evals(j)) * evecs.col(j);
        }
      }
      if (d_zero.norm() > 1e-12 * std::max(1.0, grad.norm())) {
        p = Z * d_zero;
        ray = true;
      } else {
        p = Z * d_newton;
      }
    }

    const double step_scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
    if (p.lpNorm<Eigen::Infinity>() <= 1e-13 * step_scale) {
      // Stationary on the current face: inspect multipliers.
      const VectorXd lam = working_multipliers(a_w, grad);
      const bool bland = degenerate_steps > 2 * (n + m);
      int drop = -1;
      double best = 0.0;
      for (int j = 0; j < k; ++j) {
        const double scaled = lam(j) * row_norm[working[j]];
        if (scaled >= -kQpStationarityTol) continue;
        bool take = drop < 0;
        if (!take && bland) {
          take = working[j] < working[drop];
        } else if (!take) {
          take = scaled < best - kQpTieTol ||
                 (std::abs(scaled - best) <= kQpTieTol &&
                  working[j] < working[drop]);
        }
        if (take) {
          drop = j;
          best = scaled;
        }
      }
      if (drop < 0) {
        out.status = QpStatus::kOptimal;
        out.x = x;
        out.working = working;
        out.lambda = VectorXd::Zero(m);
        for (int j = 0; j < k; ++j) {
          out.lambda(working[j]) = std::max(0.0, lam(j));
        }
        return out;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test; ties go to the lowest row index.
    double alpha = ray ? std::numeric_limits<double>::infinity() : 1.0;
    int blocking = -1;
    const double p_norm = p.norm();
    for (int i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) {
        continue;
      }
      const double rate = G.row(i).dot(p);
      if (rate >= -kQpTieTol * row_norm[i] * p_norm) continue;
      const double slack = std::max(0.0, G.row(i).dot(x) - h(i));
      const double a_i = slack / -rate;
      if (a_i < alpha - kQpTieTol ||
          (blocking >= 0 && std::abs(a_i - alpha) <= kQpTieTol &&
           i < blocking)) {
        alpha = a_i;
        blocking = i;
      }
    }
    if (!std::isfinite(alpha)) {
      out.status = QpStatus::kUnbounded;
      out.x = x;
      out.working = working;
      return out;
    }
    degenerate_steps = alpha <= kQpTieTol ? degenerate_steps + 1 : 0;
    x += alpha * p;
    if (blocking >= 0) working.push_back(blocking);
  }
  out.status = QpStatus::kIterationLimit;
  out.x = x;
  out.working = working;
  out.lambda = VectorXd::Zero(m);
  return out;
}

}  // namespace detail

struct QpOptions {
  // Optional starting point; used when feasible, otherwise phase 1 starts
  // from it.
  std::optional<VectorXd> warm_start;
  int max_iterations = 0;  // 0 selects 100 + 20 (n + m)
};

inline QpSolution solve_qp(const QpProblem& p, const QpOptions& options = {}) {
  const int n = p.num_vars();
  if (p.Q.rows() != n || p.Q.cols() != n || p.A_in.cols() != n ||
      p.A_eq.cols() != n || p.A_in.rows() != p.b_in.size() ||
      p.A_eq.rows() != p.b_eq.size()) {
    throw QpError(QpError::Code::kDimensionMismatch,
                  "QP dimensions are inconsistent");
  }
  if (n > 0) {
    const double scale = std::max(1.0, p.Q.cwiseAbs().maxCoeff());
    if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw QpError(QpError::Code::kNotPsd, "Q is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p.Q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw QpError(QpError::Code::kNotPsd, "Q is not positive semidefinite");
    }
  }

  const int m = static_cast<int>(p.A_in.rows());
  const int n_eq = static_cast<int>(p.A_eq.rows());
  QpSolution sol;

  // Equality elimination: v = v_p + Z w.
  VectorXd v_p = VectorXd::Zero(n);
  MatrixXd Z = MatrixXd::Identity(n, n);
  if (n_eq > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(p.A_eq);
    cod.setThreshold(1e-12);
    v_p = cod.solve(p.b_eq);
    const VectorXd residual = p.b_eq - p.A_eq * v_p;
    if (residual.lpNorm<Eigen::Infinity>() >
        kQpFeasibilityTol * (1.0 + p.b_eq.lpNorm<Eigen::Infinity>())) {
      sol.status = QpStatus::kInfeasible;
      sol.farkas_in = VectorXd::Zero(m);
      sol.farkas_eq = residual;
      return sol;
    }
    Eigen::JacobiSVD<MatrixXd> svd(p.A_eq, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-12 * std::max(1.0, sv.size() ? sv(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
    Z = svd.matrixV().rightCols(n - rank);
  }
  const int nz = static_cast<int>(Z.cols());

  const MatrixXd H = Z.transpose() * p.Q * Z;
  const VectorXd g = Z.transpose() * (p.Q * v_p + p.q);
  MatrixXd G = p.A_in * Z;
  VectorXd h = p.b_in - p.A_in * v_p;

  auto recover_equality_multipliers = [&](const VectorXd& y_in,
                                          const VectorXd& target) {
    // Solve A_eq' mu = target - A_in' y_in in the least-squares sense.
    if (n_eq == 0) return VectorXd();
    VectorXd rhs = target;
    if (m > 0) rhs -= p.A_in.transpose() * y_in;
    return VectorXd(p.A_eq.transpose().colPivHouseholderQr().solve(rhs));
  };

  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : 100 + 20 * (n + m);

  // Rows with no dependence on the free variables are either vacuous or
  // prove infeasibility on their own.
  for (int i = 0; i < m; ++i) {
    // Rounding noise left by the elimination must not enter a working set.
    if (G.row(i).norm() > 1e-12 * std::max(1.0, p.A_in.row(i).norm())) continue;
    G.row(i).setZero();
    if (h(i) <= kQpFeasibilityTol) {
      h(i) = -1.0;
    } else {
      sol.status = QpStatus::kInfeasible;
      sol.farkas_in = VectorXd::Zero(m);
      sol.farkas_in(i) = 1.0;
      sol.farkas_eq = recover_equality_multipliers(sol.farkas_in,
                                                   VectorXd::Zero(n));
      return sol;
    }
  }

  // Starting point in reduced coordinates.
  VectorXd w = VectorXd::Zero(nz);
  if (options.warm_start && options.warm_start->size() == n && nz > 0) {
    w = Z.transpose() * (*options.warm_start - v_p);
  }

  double worst = 0.0;
  for (int i = 0; i < m; ++i) worst = std::max(worst, h(i) - G.row(i).dot(w));
  int iterations = 0;

  if (worst > kQpFeasibilityTol) {
    // Phase 1: min t  s.t.  G w + t >= h,  t >= 0.
    MatrixXd G1(m + 1, nz + 1);
    G1.setZero();
    G1.topLeftCorner(m, nz) = G;
    G1.col(nz).head(m).setOnes();
    G1(m, nz) = 1.0;
    VectorXd h1(m + 1);
    h1.head(m) = h;
    h1(m) = 0.0;
    VectorXd x1(nz + 1);
    x1.head(nz) = w;
    x1(nz) = worst;
    VectorXd g1 = VectorXd::Zero(nz + 1);
    g1(nz) = 1.0;
    const MatrixXd H1 = MatrixXd::Zero(nz + 1, nz + 1);
    const detail::CoreResult r1 =
        detail::active_set_core(H1, g1, G1, h1, x1, max_iter);
    iterations += r1.iterations;
    if (r1.status != QpStatus::kOptimal) {
      sol.status = QpStatus::kIterationLimit;
      sol.iterations = iterations;
      sol.v = v_p + Z * r1.x.head(nz);
      sol.objective = p.objective(sol.v);
      return sol;
    }
    if (r1.x(nz) > kQpFeasibilityTol) {
      sol.status = QpStatus::kInfeasible;
      sol.iterations = iterations;
      sol.farkas_in = r1.lambda.head(m);
      // A_in' y lies in range(A_eq'); y_eq cancels it.
      sol.farkas_eq = recover_equality_multipliers(sol.farkas_in,
                                                   VectorXd::Zero(n));
      return sol;
    }
    w = r1.x.head(nz);
  }

  const detail::CoreResult r2 = detail::active_set_core(H, g, G, h, w, max_iter);
  iterations += r2.iterations;
  sol.iterations = iterations;
  sol.v = v_p + Z * r2.x;
  sol.objective = p.objective(sol.v);
  sol.active_set = r2.working;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.status = r2.status;
  if (r2.status == QpStatus::kOptimal) {
    sol.lambda_in = r2.lambda;
    const VectorXd grad = p.Q * sol.v + p.q;
    sol.mu_eq = recover_equality_multipliers(sol.lambda_in, grad);
    if (m > 0 && sol.lambda_in.size() == 0) sol.lambda_in = VectorXd::Zero(m);
  } else {
    sol.lambda_in = VectorXd::Zero(m);
    sol.mu_eq = VectorXd::Zero(n_eq);
  }
  return sol;
}

}  // namespace dlgp
