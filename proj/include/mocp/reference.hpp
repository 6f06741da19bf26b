#pragma once

// Derivative data of L, φ and g evaluated along a reference trajectory,
// i.e. L_x[t], φ_u[t], ∇²g[t] and friends at every grid node.

#include <vector>

#include <Eigen/Core>

#include "mocp/grid.hpp"
#include "mocp/problem.hpp"

namespace mocp {

struct ReferenceData {
  Grid grid{2};
  int n = 0, l = 0, m = 0;
  Eigen::VectorXd constraint;                 // g[t_i]
  std::vector<Eigen::MatrixXd> cost_grad;     // per node, m x (n+l)
  std::vector<Eigen::MatrixXd> dyn_jac;       // per node, n x (n+l)
  Eigen::MatrixXd con_grad;                   // (N+1) x (n+l)
  std::vector<std::vector<Eigen::MatrixXd>> cost_hess;  // [node][j]
  std::vector<std::vector<Eigen::MatrixXd>> dyn_hess;   // [node][i]
  std::vector<Eigen::MatrixXd> con_hess;                // [node]
  bool has_hessians = false;

  int nz() const { return n + l; }
  auto state_jac(int node) const { return dyn_jac[static_cast<std::size_t>(node)].leftCols(n); }
  auto control_jac(int node) const { return dyn_jac[static_cast<std::size_t>(node)].rightCols(l); }
};

inline ReferenceData linearize(const Problem& problem, const Trajectory& traj, bool with_hessians = true) {
  require_shape(traj, problem.n(), problem.l());
  ReferenceData ref;
  ref.grid = traj.grid;
  ref.n = problem.n();
  ref.l = problem.l();
  ref.m = problem.m();
  ref.has_hessians = with_hessians;
  const int nodes = traj.grid.nodes();
  const int k = problem.nz();
  ref.constraint.resize(nodes);
  ref.con_grad.resize(nodes, k);
  ref.cost_grad.assign(static_cast<std::size_t>(nodes), Eigen::MatrixXd(ref.m, k));
  ref.dyn_jac.assign(static_cast<std::size_t>(nodes), Eigen::MatrixXd(ref.n, k));
  if (with_hessians) {
    ref.cost_hess.assign(static_cast<std::size_t>(nodes),
                         std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(ref.m), Eigen::MatrixXd(k, k)));
    ref.dyn_hess.assign(static_cast<std::size_t>(nodes),
                        std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(ref.n), Eigen::MatrixXd(k, k)));
    ref.con_hess.assign(static_cast<std::size_t>(nodes), Eigen::MatrixXd(k, k));
  }
  std::vector<double> binding;
  for (int i = 0; i < nodes; ++i) {
    const auto s = static_cast<std::size_t>(i);
    problem.bind(traj.grid.node(i), traj.x.row(i), traj.u.row(i), binding);
    ref.constraint[i] = evaluate(problem.constraint().value, binding);
    problem.constraint().eval_gradient(binding, ref.con_grad.row(i));
    for (int j = 0; j < ref.m; ++j) problem.cost(j).eval_gradient(binding, ref.cost_grad[s].row(j));
    for (int c = 0; c < ref.n; ++c) problem.dynamics(c).eval_gradient(binding, ref.dyn_jac[s].row(c));
    if (with_hessians) {
      for (int j = 0; j < ref.m; ++j)
        problem.cost(j).eval_hessian(binding, ref.cost_hess[s][static_cast<std::size_t>(j)]);
      for (int c = 0; c < ref.n; ++c)
        problem.dynamics(c).eval_hessian(binding, ref.dyn_hess[s][static_cast<std::size_t>(c)]);
      problem.constraint().eval_hessian(binding, ref.con_hess[s]);
    }
  }
  return ref;
}

}  // namespace mocp
