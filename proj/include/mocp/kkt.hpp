#pragma once

// First-order multipliers (λ, p, θ) of a multi-objective control problem:
//
//   ṗ = -λᵀL_x[t] - φ_x[t]ᵀ p - θ(t) g_x[t],   p(1) = 0        (adjoint)
//   λᵀL_u[t] + pᵀφ_u[t] + θ(t) g_u[t] = 0                     (stationarity)
//   θ(t) >= 0,  θ(t) g[t] = 0                                 (normal cone)

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mocp/grid.hpp"
#include "mocp/problem.hpp"
#include "mocp/reference.hpp"
#include "mocp/trajectory.hpp"

namespace mocp {

class KktError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KktTolerances {
  double stationarity = 1e-8;
  double adjoint = 1e-8;
  double terminal = 1e-8;
  double sign = 1e-8;
  double complementarity = 1e-8;
  double feasibility = 1e-8;

  static KktTolerances uniform(double tol) { return {tol, tol, tol, tol, tol, tol}; }
};

struct MultiplierTriple {
  Eigen::VectorXd lambda;  // m
  Eigen::MatrixXd p;       // (N+1) x n
  Eigen::VectorXd theta;   // N+1
};

struct KktReport {
  double stationarity_residual = 0.0;
  double adjoint_residual = 0.0;
  double terminal_residual = 0.0;
  double theta_sign_violation = 0.0;
  double complementarity_residual = 0.0;
  double feasibility_residual = 0.0;  // max(0, max_i g[t_i])
  double state_residual = 0.0;
  double lambda_norm = 0.0;
  int i0 = 0;
  int grid_n = 0;
  bool converged = true;
  int iterations = 0;
  KktTolerances tol;
  Eigen::VectorXd lambda;
  bool pass = false;
};

inline void check_weights(const Eigen::VectorXd& lambda, int m) {
  if (lambda.size() != m)
    throw KktError("lambda has " + std::to_string(lambda.size()) + " entries, expected m = " + std::to_string(m));
  if ((lambda.array() < 0.0).any()) throw KktError("lambda must be entrywise nonnegative");
  if (lambda.norm() == 0.0) throw KktError("lambda must be nonzero");
}

/// Control component of g_u with the largest minimum magnitude over the grid;
/// lowest index wins ties.
inline int select_control_index(const ReferenceData& ref) {
  int best = 0;
  double best_value = -1.0;
  for (int k = 0; k < ref.l; ++k) {
    const double lowest = ref.con_grad.col(ref.n + k).cwiseAbs().minCoeff();
    if (lowest > best_value) {
      best_value = lowest;
      best = k;
    }
  }
  return best;
}

namespace detail {
// Right-hand side of the adjoint equation at node data (a, A, c, θ).
inline Eigen::VectorXd adjoint_rhs(const Eigen::VectorXd& cost_x, const Eigen::MatrixXd& state_jac,
                                   const Eigen::VectorXd& con_x, double theta, const Eigen::VectorXd& p) {
  return -(cost_x + state_jac.transpose() * p + theta * con_x);
}
}  // namespace detail

/// One backward RK4 step from t_{i+1} to t_i; coefficients and θ are linear
/// between nodes.
inline Eigen::VectorXd adjoint_step(const ReferenceData& ref, const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& theta, int i, const Eigen::VectorXd& p_next) {
  const int n = ref.n;
  const double h = ref.grid.step();
  const auto si = static_cast<std::size_t>(i);
  const Eigen::VectorXd a0 = ref.cost_grad[si].leftCols(n).transpose() * lambda;
  const Eigen::VectorXd a1 = ref.cost_grad[si + 1].leftCols(n).transpose() * lambda;
  const Eigen::MatrixXd A0 = ref.state_jac(i);
  const Eigen::MatrixXd A1 = ref.state_jac(i + 1);
  const Eigen::VectorXd c0 = ref.con_grad.row(i).head(n).transpose();
  const Eigen::VectorXd c1 = ref.con_grad.row(i + 1).head(n).transpose();
  const Eigen::VectorXd am = 0.5 * (a0 + a1);
  const Eigen::MatrixXd Am = 0.5 * (A0 + A1);
  const Eigen::VectorXd cm = 0.5 * (c0 + c1);
  const double thm = 0.5 * (theta[i] + theta[i + 1]);

  const Eigen::VectorXd k1 = detail::adjoint_rhs(a1, A1, c1, theta[i + 1], p_next);
  const Eigen::VectorXd k2 = detail::adjoint_rhs(am, Am, cm, thm, p_next - 0.5 * h * k1);
  const Eigen::VectorXd k3 = detail::adjoint_rhs(am, Am, cm, thm, p_next - 0.5 * h * k2);
  const Eigen::VectorXd k4 = detail::adjoint_rhs(a0, A0, c0, theta[i], p_next - h * k3);
  return p_next - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates the adjoint equation backward from p(1) = 0.
inline Eigen::MatrixXd solve_adjoint(const ReferenceData& ref, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& theta) {
  check_weights(lambda, ref.m);
  if (theta.size() != ref.grid.nodes()) throw KktError("theta must have one sample per node");
  const int last = ref.grid.intervals();
  Eigen::MatrixXd p(ref.grid.nodes(), ref.n);
  p.row(last).setZero();
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(ref.n);
  for (int i = last - 1; i >= 0; --i) {
    cur = adjoint_step(ref, lambda, theta, i, cur);
    if (!cur.allFinite()) throw IntegrationError("non-finite adjoint", i);
    p.row(i) = cur.transpose();
  }
  return p;
}

inline Eigen::MatrixXd solve_adjoint(const Problem& problem, const Trajectory& traj,
                                     const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) {
  return solve_adjoint(linearize(problem, traj, false), lambda, theta);
}

/// λᵀL_u[t_i] + p_iᵀφ_u[t_i] for every node; (N+1) x l.
inline Eigen::MatrixXd reduced_gradient(const ReferenceData& ref, const Eigen::VectorXd& lambda,
                                        const Eigen::MatrixXd& p) {
  Eigen::MatrixXd out(ref.grid.nodes(), ref.l);
  for (int i = 0; i < ref.grid.nodes(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    out.row(i) = lambda.transpose() * ref.cost_grad[si].rightCols(ref.l) +
                 p.row(i) * ref.control_jac(i);
  }
  return out;
}

/// Solves stationarity component i0 for θ at every node.
inline Eigen::VectorXd recover_theta(const ReferenceData& ref, const Eigen::VectorXd& lambda,
                                     const Eigen::MatrixXd& p, int i0) {
  check_weights(lambda, ref.m);
  const Eigen::MatrixXd reduced = reduced_gradient(ref, lambda, p);
  Eigen::VectorXd theta(ref.grid.nodes());
  for (int i = 0; i < ref.grid.nodes(); ++i) {
    const double g_u = ref.con_grad(i, ref.n + i0);
    if (std::abs(g_u) < 1e-12)
      throw KktError("g_u" + std::to_string(i0 + 1) + " vanishes at node " + std::to_string(i) +
                     "; the constraint is not uniformly control-regular on this grid");
    theta[i] = -reduced(i, i0) / g_u;
  }
  return theta;
}

inline Eigen::VectorXd recover_theta(const Problem& problem, const Trajectory& traj,
                                     const Eigen::VectorXd& lambda, const Eigen::MatrixXd& p) {
  const ReferenceData ref = linearize(problem, traj, false);
  return recover_theta(ref, lambda, p, select_control_index(ref));
}

/// Evaluates every first-order residual of a candidate triple at the nodes.
inline KktReport kkt_residuals(const Problem& problem, const Trajectory& traj, const ReferenceData& ref,
                               const MultiplierTriple& triple, const KktTolerances& tol = {}) {
  check_weights(triple.lambda, ref.m);
  const int nodes = ref.grid.nodes();
  if (triple.p.rows() != nodes || triple.p.cols() != ref.n || triple.theta.size() != nodes)
    throw KktError("multiplier samples do not match the grid");

  KktReport report;
  report.tol = tol;
  report.lambda = triple.lambda;
  report.lambda_norm = triple.lambda.norm();
  report.grid_n = ref.grid.intervals();
  report.i0 = select_control_index(ref);

  const Eigen::MatrixXd reduced = reduced_gradient(ref, triple.lambda, triple.p);
  for (int i = 0; i < nodes; ++i) {
    const Eigen::RowVectorXd stat = reduced.row(i) + triple.theta[i] * ref.con_grad.row(i).tail(ref.l);
    report.stationarity_residual = std::max(report.stationarity_residual, stat.cwiseAbs().maxCoeff());
    report.theta_sign_violation = std::max(report.theta_sign_violation, -triple.theta[i]);
    report.complementarity_residual =
        std::max(report.complementarity_residual, std::abs(triple.theta[i] * ref.constraint[i]));
    report.feasibility_residual = std::max(report.feasibility_residual, ref.constraint[i]);
  }
  for (int i = 0; i + 1 < nodes; ++i) {
    const Eigen::VectorXd next = triple.p.row(i + 1).transpose();
    const Eigen::VectorXd predicted = adjoint_step(ref, triple.lambda, triple.theta, i, next);
    report.adjoint_residual =
        std::max(report.adjoint_residual, (triple.p.row(i).transpose() - predicted).cwiseAbs().maxCoeff());
  }
  report.terminal_residual = triple.p.row(nodes - 1).cwiseAbs().maxCoeff();
  report.state_residual = state_residual(problem, traj);

  report.pass = report.stationarity_residual <= tol.stationarity && report.adjoint_residual <= tol.adjoint &&
                report.terminal_residual <= tol.terminal && report.theta_sign_violation <= tol.sign &&
                report.complementarity_residual <= tol.complementarity &&
                report.feasibility_residual <= tol.feasibility && report.state_residual <= tol.feasibility;
  return report;
}

inline KktReport kkt_residuals(const Problem& problem, const Trajectory& traj, const MultiplierTriple& triple,
                               const KktTolerances& tol = {}) {
  return kkt_residuals(problem, traj, linearize(problem, traj, false), triple, tol);
}

struct KktSolution {
  MultiplierTriple triple;
  KktReport report;
};

struct KktSolveOptions {
  int max_iterations = 100;
  double change_tol = 1e-10;
};

/// Fixed point θ⁰ = 0, p^k = adjoint(θ^k), θ^{k+1} = recover(p^k), stopped
/// when the largest nodal change of θ is below change_tol. Non-convergence is
/// reported through report.converged; the last iterate is returned.
inline KktSolution solve_kkt_system(const Problem& problem, const Trajectory& traj, const ReferenceData& ref,
                                    const Eigen::VectorXd& lambda, const KktTolerances& tol = {},
                                    const KktSolveOptions& options = {}) {
  check_weights(lambda, ref.m);
  const int i0 = select_control_index(ref);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(ref.grid.nodes());
  Eigen::MatrixXd p;
  bool converged = false;
  int iterations = 0;
  while (iterations < options.max_iterations) {
    ++iterations;
    p = solve_adjoint(ref, lambda, theta);
    Eigen::VectorXd next = recover_theta(ref, lambda, p, i0);
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = std::move(next);
    if (change <= options.change_tol) {
      converged = true;
      break;
    }
  }
  KktSolution solution{{lambda, p, theta}, {}};
  solution.report = kkt_residuals(problem, traj, ref, solution.triple, tol);
  solution.report.converged = converged;
  solution.report.iterations = iterations;
  return solution;
}

inline KktSolution solve_kkt_system(const Problem& problem, const Trajectory& traj, const Eigen::VectorXd& lambda,
                                    const KktTolerances& tol = {}, const KktSolveOptions& options = {}) {
  return solve_kkt_system(problem, traj, linearize(problem, traj, false), lambda, tol, options);
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const KktTolerances& tol) {
  return {{"stationarity", tol.stationarity}, {"adjoint", tol.adjoint},
          {"terminal", tol.terminal},         {"sign", tol.sign},
          {"complementarity", tol.complementarity}, {"feasibility", tol.feasibility}};
}

inline nlohmann::json to_json(const KktReport& r) {
  std::vector<double> lambda(r.lambda.data(), r.lambda.data() + r.lambda.size());
  return {{"stationarity_residual", r.stationarity_residual},
          {"adjoint_residual", r.adjoint_residual},
          {"terminal_residual", r.terminal_residual},
          {"theta_sign_violation", r.theta_sign_violation},
          {"complementarity_residual", r.complementarity_residual},
          {"feasibility_residual", r.feasibility_residual},
          {"state_residual", r.state_residual},
          {"lambda", lambda},
          {"lambda_norm", r.lambda_norm},
          {"i0", r.i0 + 1},
          {"grid_n", r.grid_n},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"tolerances", to_json(r.tol)},
          {"pass", r.pass}};
}

}  // namespace mocp
