#pragma once

// Shared fixtures and independent oracles for the test suite.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mocp/mocp.hpp"

namespace testing_support {

/// Nonlinear problem with state-dependent dynamics. Defined here and not in
/// the builtin registry.
inline mocp::Problem nonlinear_problem() {
  return mocp::Problem("nonlinear_test", 2, 2, 2, (Eigen::VectorXd(2) << 0.5, -0.25).finished(),
                       {"x1^2 + u1^2 + sin(x2)", "(x2 - 1)^2 + u2^2 + x1*u2"},
                       {"-x1 + u1 + sin(t)", "x1*x2 + cos(u2)"}, "x1 + x2 - u1 - u2 - 10");
}

/// Linear dynamics with a constraint that stays active along z = 0.
inline mocp::Problem linear_problem() {
  return mocp::Problem("linear_test", 1, 1, 2, Eigen::VectorXd::Zero(1), {"x1^2 + u1^2", "(x1 - 1)^2 + 2*u1^2"},
                       {"-x1 + u1"}, "x1 - u1");
}

/// Smooth random controls: a few Fourier modes per component.
template <typename Rng>
Eigen::MatrixXd smooth_controls(const mocp::Grid& grid, int l, Rng& rng, double scale = 1.0, double offset = 0.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd u(grid.nodes(), l);
  for (int r = 0; r < l; ++r) {
    double c[6];
    for (double& v : c) v = normal(rng);
    for (int i = 0; i < grid.nodes(); ++i) {
      const double t = grid.node(i);
      u(i, r) = offset + scale * (c[0] + c[1] * std::sin(M_PI * t) + c[2] * std::cos(2 * M_PI * t) +
                                  0.5 * c[3] * std::sin(3 * M_PI * t) + 0.3 * c[4] * t + 0.2 * c[5] * t * t);
    }
  }
  return u;
}

inline mocp::Trajectory zero_trajectory(const mocp::Problem& p, int n_intervals) {
  return mocp::integrate_state(p, Eigen::MatrixXd::Zero(n_intervals + 1, p.l()), mocp::Grid(n_intervals));
}

/// The direction x = (t, t), u = (1, 1) used for the sign-changing example.
inline mocp::Direction ramp_direction(const mocp::Grid& grid) {
  mocp::Direction d;
  d.grid = grid;
  d.x.resize(grid.nodes(), 2);
  d.u = Eigen::MatrixXd::Ones(grid.nodes(), 2);
  for (int i = 0; i < grid.nodes(); ++i) d.x.row(i).setConstant(grid.node(i));
  return d;
}

inline mocp::MultiplierTriple zero_multipliers(const Eigen::VectorXd& lambda, const mocp::Grid& grid, int n) {
  return {lambda, Eigen::MatrixXd::Zero(grid.nodes(), n), Eigen::VectorXd::Zero(grid.nodes())};
}

/// Scalarized discrete objective Σ_j λ_j ∫ L_j dt along integrate_state(u).
inline double scalarized_objective(const mocp::Problem& p, const Eigen::MatrixXd& u, const mocp::Grid& grid,
                                   const Eigen::VectorXd& lambda) {
  const mocp::Trajectory traj = mocp::integrate_state(p, u, grid);
  Eigen::VectorXd integrand = Eigen::VectorXd::Zero(grid.nodes());
  std::vector<double> binding;
  for (int i = 0; i < grid.nodes(); ++i) {
    p.bind(grid.node(i), traj.x.row(i), traj.u.row(i), binding);
    for (int j = 0; j < p.m(); ++j) integrand[i] += lambda[j] * mocp::evaluate(p.cost(j).value, binding);
  }
  return mocp::quadrature(integrand, grid);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testing_support
