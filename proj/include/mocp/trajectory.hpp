#pragma once

// Forward integration of the state equation, its integral-form residual and
// the linearized state map z = (x, u) -> x used by the critical cones.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "mocp/grid.hpp"
#include "mocp/problem.hpp"
#include "mocp/reference.hpp"

namespace mocp {

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, int node)
      : std::runtime_error(what + " at node " + std::to_string(node)), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

/// Classical RK4 for ẋ = φ(t, x, u) with u linear between nodes; x(0) = x0.
inline Trajectory integrate_state(const Problem& problem, const Eigen::MatrixXd& controls, const Grid& grid) {
  if (controls.rows() != grid.nodes() || controls.cols() != problem.l())
    throw GridError("control samples must be (N+1) x l");
  const int n = problem.n();
  const double h = grid.step();
  Trajectory traj;
  traj.grid = grid;
  traj.u = controls;
  traj.x.resize(grid.nodes(), n);
  traj.x.row(0) = problem.x0().transpose();

  std::vector<double> binding;
  Eigen::VectorXd x(n), k1(n), k2(n), k3(n), k4(n), stage(n);
  auto rhs = [&](double t, const Eigen::VectorXd& state, const Eigen::RowVectorXd& u, Eigen::VectorXd& out) {
    problem.bind(t, state, u, binding);
    problem.eval_dynamics(binding, out);
  };
  for (int i = 0; i < grid.intervals(); ++i) {
    const double t = grid.node(i);
    const Eigen::RowVectorXd u0 = controls.row(i);
    const Eigen::RowVectorXd u1 = controls.row(i + 1);
    const Eigen::RowVectorXd um = 0.5 * (u0 + u1);
    x = traj.x.row(i).transpose();
    rhs(t, x, u0, k1);
    stage = x + 0.5 * h * k1;
    rhs(t + 0.5 * h, stage, um, k2);
    stage = x + 0.5 * h * k2;
    rhs(t + 0.5 * h, stage, um, k3);
    stage = x + h * k3;
    rhs(grid.node(i + 1), stage, u1, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw IntegrationError("non-finite state", i + 1);
    traj.x.row(i + 1) = x.transpose();
  }
  return traj;
}

/// max_i |x(t_i) - x0 - ∫_0^{t_i} φ(s, x, u) ds| with the integral taken by
/// cumulative trapezoid over the nodal samples.
inline double state_residual(const Problem& problem, const Trajectory& traj) {
  require_shape(traj, problem.n(), problem.l());
  const int n = problem.n();
  const double h = traj.grid.step();
  std::vector<double> binding;
  Eigen::VectorXd prev(n), cur(n), integral = Eigen::VectorXd::Zero(n);
  problem.bind(0.0, traj.x.row(0), traj.u.row(0), binding);
  problem.eval_dynamics(binding, prev);
  double worst = (traj.x.row(0).transpose() - problem.x0()).cwiseAbs().maxCoeff();
  for (int i = 1; i < traj.grid.nodes(); ++i) {
    problem.bind(traj.grid.node(i), traj.x.row(i), traj.u.row(i), binding);
    problem.eval_dynamics(binding, cur);
    integral += 0.5 * h * (prev + cur);
    const double defect = (traj.x.row(i).transpose() - problem.x0() - integral).cwiseAbs().maxCoeff();
    worst = std::max(worst, defect);
    prev = cur;
  }
  return worst;
}

/// One RK4 step of ẋ = φ_x[t] x + φ_u[t] v from t_i to t_{i+1}; coefficients
/// and v are linear between nodes.
inline Eigen::VectorXd linearized_step(const ReferenceData& ref, int i, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& v0, const Eigen::VectorXd& v1) {
  const double h = ref.grid.step();
  const auto a0 = ref.state_jac(i);
  const auto a1 = ref.state_jac(i + 1);
  const auto b0 = ref.control_jac(i);
  const auto b1 = ref.control_jac(i + 1);
  const Eigen::MatrixXd a_mid = 0.5 * (a0 + a1);
  const Eigen::MatrixXd b_mid = 0.5 * (b0 + b1);
  const Eigen::VectorXd vm = 0.5 * (v0 + v1);
  const Eigen::VectorXd k1 = a0 * x + b0 * v0;
  const Eigen::VectorXd k2 = a_mid * (x + 0.5 * h * k1) + b_mid * vm;
  const Eigen::VectorXd k3 = a_mid * (x + 0.5 * h * k2) + b_mid * vm;
  const Eigen::VectorXd k4 = a1 * (x + h * k3) + b1 * v1;
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Solves the linearized state equation with x(0) = 0 for a control
/// direction given at the nodes.
inline Eigen::MatrixXd linearized_state(const ReferenceData& ref, const Eigen::MatrixXd& control_dir) {
  const Grid& grid = ref.grid;
  if (control_dir.rows() != grid.nodes() || control_dir.cols() != ref.l)
    throw GridError("control direction must be (N+1) x l");
  Eigen::MatrixXd out(grid.nodes(), ref.n);
  out.row(0).setZero();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ref.n);
  for (int i = 0; i < grid.intervals(); ++i) {
    x = linearized_step(ref, i, x, control_dir.row(i).transpose(), control_dir.row(i + 1).transpose());
    out.row(i + 1) = x.transpose();
  }
  return out;
}

inline Eigen::MatrixXd linearized_state(const Problem& problem, const Trajectory& traj,
                                        const Eigen::MatrixXd& control_dir) {
  return linearized_state(linearize(problem, traj, false), control_dir);
}

}  // namespace mocp
