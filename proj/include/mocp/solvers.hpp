#pragma once

// Small dense solvers: Lawson–Hanson nonnegative least squares and a
// tableau simplex for max cᵀy s.t. My <= b, y >= 0 with b >= 0.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace mocp {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// min ||A x - b||_2 subject to x >= 0.
inline NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iterations = -1) {
  const Eigen::Index cols = A.cols();
  NnlsResult result;
  result.x = Eigen::VectorXd::Zero(cols);
  if (cols == 0) {
    result.residual_norm = b.norm();
    return result;
  }
  if (max_iterations < 0) max_iterations = static_cast<int>(3 * cols + 10);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff()) *
                     static_cast<double>(std::max(A.rows(), cols));

  std::vector<bool> passive(static_cast<std::size_t>(cols), false);
  Eigen::VectorXd& x = result.x;
  Eigen::VectorXd w = A.transpose() * (b - A * x);

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
    const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
    s.setZero(cols);
    for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = z[static_cast<Eigen::Index>(k)];
  };

  Eigen::VectorXd s(cols);
  while (true) {
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        enter = j;
      }
    }
    if (enter < 0) break;
    if (++result.iterations > max_iterations) {
      result.converged = false;
      break;
    }
    passive[static_cast<std::size_t>(enter)] = true;

    while (true) {
      solve_passive(s);
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
          const double denom = x[j] - s[j];
          if (denom > 0.0) alpha = std::min(alpha, x[j] / denom);
        }
      }
      if (!std::isfinite(alpha)) {
        x = s;
        break;
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
    w = A.transpose() * (b - A * x);
  }
  for (Eigen::Index j = 0; j < cols; ++j) x[j] = std::max(0.0, x[j]);
  result.residual_norm = (A * x - b).norm();
  return result;
}

struct LpResult {
  enum class Status { Optimal, Unbounded, IterationLimit };
  Status status = Status::Optimal;
  double objective = 0.0;
  Eigen::VectorXd y;
};

/// max cᵀy s.t. M y <= b, y >= 0, for b >= 0 (the origin is feasible).
/// Dense tableau with Bland's rule.
inline LpResult simplex_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& M, const Eigen::VectorXd& b) {
  const Eigen::Index rows = M.rows();
  const Eigen::Index vars = M.cols();
  constexpr double eps = 1e-12;
  // Columns: vars, slacks, rhs. Last row: reduced costs.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(rows + 1, vars + rows + 1);
  T.topLeftCorner(rows, vars) = M;
  T.block(0, vars, rows, rows).setIdentity();
  T.topRightCorner(rows, 1) = b;
  T.bottomLeftCorner(1, vars) = -c.transpose();
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) basis[static_cast<std::size_t>(i)] = vars + i;

  LpResult result;
  const int limit = 50 * static_cast<int>(rows + vars + 1);
  for (int iter = 0;; ++iter) {
    if (iter >= limit) {
      result.status = LpResult::Status::IterationLimit;
      break;
    }
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < vars + rows; ++j) {
      if (T(rows, j) < -eps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double a = T(i, enter);
      if (a > eps) {
        const double ratio = T(i, vars + rows) / a;
        if (ratio < best_ratio - eps ||
            (ratio <= best_ratio + eps && leave >= 0 &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best_ratio = std::min(best_ratio, ratio);
          leave = i;
        }
      }
    }
    if (leave < 0) {
      result.status = LpResult::Status::Unbounded;
      break;
    }
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i <= rows; ++i) {
      if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  result.y = Eigen::VectorXd::Zero(vars);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index var = basis[static_cast<std::size_t>(i)];
    if (var < vars) result.y[var] = T(i, vars + rows);
  }
  result.objective = c.dot(result.y);
  return result;
}

}  // namespace mocp
