#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mocp/grid.hpp"
#include "mocp/trajectory.hpp"
#include "support.hpp"

using namespace mocp;
namespace ts = testing_support;

TEST(GridBasics, NodesWeightsAndGuards) {
  const Grid g(4);
  EXPECT_EQ(g.nodes(), 5);
  EXPECT_DOUBLE_EQ(g.node(0), 0.0);
  EXPECT_DOUBLE_EQ(g.node(4), 1.0);
  EXPECT_DOUBLE_EQ(g.weight(0), 0.125);
  EXPECT_DOUBLE_EQ(g.weight(2), 0.25);
  EXPECT_THROW(Grid(1), GridError);
}

TEST(GridQuadrature, ExactOnLinearAndSecondOrderOnQuadratic) {
  for (int n : {4, 40}) {
    const Grid g(n);
    Eigen::VectorXd lin(g.nodes()), quad(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) {
      lin[i] = 3 * g.node(i) - 1;
      quad[i] = g.node(i) * g.node(i);
    }
    EXPECT_NEAR(quadrature(lin, g), 0.5, 1e-14);
    // Trapezoid error for t^2 is h^2/6.
    EXPECT_NEAR(quadrature(quad, g), 1.0 / 3.0 + g.step() * g.step() / 6.0, 1e-14);
  }
}

TEST(GridJson, RoundTripAndValidation) {
  Direction d = ts::ramp_direction(Grid(3));
  const auto doc = to_json(static_cast<const Samples&>(d));
  const Direction back = direction_from_json(doc);
  EXPECT_EQ(back.grid, d.grid);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.u, d.u);
  auto bad = doc;
  bad["extra"] = 1;
  EXPECT_THROW(direction_from_json(bad), GridError);
  bad = doc;
  bad["x"].erase(0);
  EXPECT_THROW(direction_from_json(bad), GridError);
}

TEST(GridResample, LinearDataIsReproduced) {
  const Grid coarse(4), fine(12);
  Eigen::MatrixXd s(coarse.nodes(), 1);
  for (int i = 0; i < coarse.nodes(); ++i) s(i, 0) = 2 * coarse.node(i) + 1;
  const Eigen::MatrixXd r = resample(s, coarse, fine);
  for (int i = 0; i < fine.nodes(); ++i) EXPECT_NEAR(r(i, 0), 2 * fine.node(i) + 1, 1e-14);
}

TEST(Integrate, ZeroControlsOnExampleGiveZeroState) {
  const Problem p = builtin("example_6_1");
  const Trajectory traj = ts::zero_trajectory(p, 100);
  EXPECT_EQ(traj.x, Eigen::MatrixXd::Zero(101, 2));
  EXPECT_EQ(state_residual(p, traj), 0.0);
}

TEST(Integrate, PiecewiseLinearControlsIntegrateExactly) {
  const Problem p = builtin("example_6_1");
  const Grid g(50);
  Eigen::MatrixXd u(g.nodes(), 2);
  for (int i = 0; i < g.nodes(); ++i) u.row(i) << 1.0, 2 * g.node(i);
  const Trajectory traj = integrate_state(p, u, g);
  for (int i = 0; i < g.nodes(); ++i) {
    EXPECT_NEAR(traj.x(i, 0), g.node(i), 1e-14);
    EXPECT_NEAR(traj.x(i, 1), g.node(i) * g.node(i), 1e-14);
  }
  EXPECT_LT(state_residual(p, traj), 1e-14);
}

TEST(Integrate, LinearOdeMatchesClosedForm) {
  // x' = -x + u, u = 0, x(0) = 1 → x = e^{-t}; RK4 error is O(h^4).
  const Problem p("decay", 1, 1, 1, Eigen::VectorXd::Ones(1), {"u1^2"}, {"-x1 + u1"}, "u1 - 1");
  const Grid g(100);
  const Trajectory traj = integrate_state(p, Eigen::MatrixXd::Zero(g.nodes(), 1), g);
  for (int i = 0; i < g.nodes(); ++i) EXPECT_NEAR(traj.x(i, 0), std::exp(-g.node(i)), 1e-9);
}

TEST(Integrate, ShapeErrorsAndBlowUp) {
  const Problem p = builtin("example_6_1");
  EXPECT_THROW(integrate_state(p, Eigen::MatrixXd::Zero(10, 2), Grid(10)), GridError);
  const Problem blow("blow", 1, 1, 1, Eigen::VectorXd::Ones(1), {"u1^2"}, {"x1^8"}, "u1");
  EXPECT_THROW(integrate_state(blow, Eigen::MatrixXd::Zero(3, 1), Grid(2)), IntegrationError);
}

TEST(StateResidual, ShrinksQuadraticallyOnAffineDynamics) {
  const Problem p("affine", 1, 1, 1, Eigen::VectorXd::Ones(1), {"u1^2"}, {"-x1 + u1"}, "u1 - 10");
  double prev = 0.0;
  for (int n : {25, 50, 100, 200}) {
    const Grid g(n);
    Eigen::MatrixXd u(g.nodes(), 1);
    for (int i = 0; i < g.nodes(); ++i) u(i, 0) = std::sin(3 * g.node(i));
    const double r = state_residual(p, integrate_state(p, u, g));
    if (prev > 0.0) {
      EXPECT_GE(prev / r, 3.5) << "N=" << n;
    }
    prev = r;
  }
}

TEST(StateResidual, DetectsPerturbation) {
  const Problem p = builtin("example_6_1");
  Trajectory traj = ts::zero_trajectory(p, 20);
  traj.x(10, 0) = 1e-3;
  EXPECT_NEAR(state_residual(p, traj), 1e-3, 1e-15);
}

TEST(LinearizedState, ExampleDirection) {
  const Problem p = builtin("example_6_2");
  const Grid g(40);
  const Trajectory traj = ts::zero_trajectory(p, 40);
  const Direction d = ts::ramp_direction(g);
  EXPECT_LT(max_norm(linearized_state(p, traj, d.u) - d.x), 1e-14);
}

TEST(LinearizedState, IsLinearInTheControl) {
  const Problem p = ts::nonlinear_problem();
  const Grid g(60);
  std::mt19937 rng(8);
  const Trajectory traj = integrate_state(p, ts::smooth_controls(g, 2, rng, 0.3), g);
  const ReferenceData ref = linearize(p, traj, false);
  const Eigen::MatrixXd a = ts::smooth_controls(g, 2, rng), b = ts::smooth_controls(g, 2, rng);
  const Eigen::MatrixXd combined = linearized_state(ref, 2.0 * a - 0.5 * b);
  const Eigen::MatrixXd separate = 2.0 * linearized_state(ref, a) - 0.5 * linearized_state(ref, b);
  EXPECT_LT(max_norm(combined - separate), 1e-12);
  EXPECT_EQ(linearized_state(ref, Eigen::MatrixXd::Zero(g.nodes(), 2)), Eigen::MatrixXd::Zero(g.nodes(), 2));
}

TEST(LinearizedState, MatchesDirectionalDerivativeOfIntegration) {
  const Problem p = ts::nonlinear_problem();
  const Grid g(200);
  std::mt19937 rng(9);
  const Eigen::MatrixXd u = ts::smooth_controls(g, 2, rng, 0.3);
  const Eigen::MatrixXd du = ts::smooth_controls(g, 2, rng);
  const Trajectory traj = integrate_state(p, u, g);
  const double eps = 1e-6;
  const Eigen::MatrixXd fd =
      (integrate_state(p, u + eps * du, g).x - integrate_state(p, u - eps * du, g).x) / (2 * eps);
  // RK4 of the linearized ODE with averaged midpoint coefficients differs
  // from the derivative of the discrete map by O(h^2).
  EXPECT_LT(max_norm(linearized_state(p, traj, du) - fd), 1e-4 * std::max(1.0, max_norm(fd)));
}
