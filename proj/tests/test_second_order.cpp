#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mocp/second_order.hpp"
#include "support.hpp"

using namespace mocp;
namespace ts = testing_support;

namespace {

Eigen::VectorXd vec2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }

Direction random_direction(const ReferenceData& ref, std::mt19937& rng) {
  Direction d;
  d.grid = ref.grid;
  d.u = ts::smooth_controls(ref.grid, ref.l, rng);
  d.x = linearized_state(ref, d.u);
  return d;
}

// Costs with vanishing gradient at the origin, state-dependent dynamics and
// an inactive constraint, so the critical cone is the whole linearized
// dynamics subspace.
Problem unconstrained_fixture() {
  return Problem("quadratic_fixture", 2, 2, 2, Eigen::VectorXd::Zero(2),
                 {"x1^2 + u1^2 - 2*u2^2 + x2*u1", "x2^2 + u2^2 + 0.3*x1*u2"}, {"x2 + u1", "-x1 + u2 + t*x1"},
                 "u1 + u2 - 5");
}

}  // namespace

TEST(CriticalCone, ExampleDirectionsAreCritical) {
  const Grid g(1000);
  for (const char* name : {"example_6_1", "example_6_2"}) {
    const Problem p = builtin(name);
    const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 1000));
    const Direction d = ts::ramp_direction(g);
    const ConeMembership c = is_critical(ref, d, ConeVariant::Sufficient);
    EXPECT_TRUE(c.pass) << name;
    EXPECT_EQ(c.c1_residual, 0.0);
    EXPECT_LT(c.c2_residual, 1e-14);
    EXPECT_NEAR(c.c3_residual, 0.0, 1e-15);  // 2t - 2 <= 0 with equality at t = 1
    EXPECT_EQ(c.active_set.size(), 1001u);
    EXPECT_TRUE(is_critical(ref, d.scaled(2.0), ConeVariant::Necessary).pass);
  }
}

TEST(CriticalCone, ZeroDirectionPassesWithZeroResiduals) {
  const Problem p = builtin("example_6_1");
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 20));
  const Direction zero = ts::ramp_direction(Grid(20)).scaled(0.0);
  const ConeMembership c = is_critical(ref, zero, ConeVariant::Necessary);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.c1_residual, 0.0);
  EXPECT_EQ(c.c2_residual, 0.0);
  EXPECT_EQ(c.c3_residual, 0.0);
}

TEST(CriticalCone, ViolationsAreDetected) {
  const Problem p = builtin("example_6_1");
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 50));
  const Direction d = ts::ramp_direction(Grid(50));
  const ConeMembership neg = is_critical(ref, d.scaled(-1.0), ConeVariant::Sufficient);
  EXPECT_FALSE(neg.pass);
  EXPECT_NEAR(neg.c3_residual, 2.0, 1e-12);
  Direction bad = d;
  bad.x.col(0) *= 1.5;
  const ConeMembership dyn = is_critical(ref, bad, ConeVariant::Sufficient);
  EXPECT_FALSE(dyn.pass);
  EXPECT_NEAR(dyn.c2_residual, 0.5, 1e-12);
  EXPECT_THROW(is_critical(ref, ts::ramp_direction(Grid(10)), ConeVariant::Sufficient), GridError);
}

TEST(CriticalCone, ObjectiveInequalityUsesQuadrature) {
  // L_2 has gradient (-2, 0) in (x, u) along z = 0, so c1 for objective 2
  // equals -2 ∫ x dt.
  const Problem p = ts::linear_problem();
  const Grid g(100);
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 100));
  Direction d;
  d.grid = g;
  d.u = Eigen::MatrixXd::Ones(g.nodes(), 1);
  d.x = linearized_state(ref, d.u);
  const ConeMembership c = is_critical(ref, d, ConeVariant::Sufficient);
  ASSERT_EQ(c.c1_values.size(), 2u);
  EXPECT_EQ(c.c1_values[0], 0.0);
  // x = 1 - e^{-t}; ∫ x = e^{-1}.
  EXPECT_NEAR(c.c1_values[1], -2.0 * std::exp(-1.0), 5e-5);
}

TEST(CriticalCone, StableUnderPositiveScaling) {
  const Problem p = ts::linear_problem();
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 200));
  std::mt19937 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Direction d = random_critical_direction(ref, rng);
    const ConeMembership c = is_critical(ref, d, ConeVariant::Sufficient);
    for (double alpha : {0.25, 3.0}) {
      const ConeMembership s = is_critical(ref, d.scaled(alpha), ConeVariant::Sufficient);
      EXPECT_EQ(s.pass, c.pass);
      EXPECT_NEAR(s.c2_residual, alpha * c.c2_residual, 1e-14);
    }
  }
}

TEST(RandomCriticalDirection, SatisfiesDynamicsAndConstraintCone) {
  const Problem p = ts::linear_problem();
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 300));
  std::mt19937 rng(12);
  for (int k = 0; k < 30; ++k) {
    const Direction d = random_critical_direction(ref, rng);
    EXPECT_NEAR(l2_norm(d.u, d.grid), 1.0, 1e-12);
    const ConeMembership c = is_critical(ref, d, ConeVariant::Sufficient);
    EXPECT_LE(c.c3_residual, 1e-10);
    EXPECT_LE(c.c2_residual, 1e-14);
  }
}

TEST(QuadraticForm, ExampleValueWithZeroMultipliers) {
  const Problem p = builtin("example_6_2");
  const Grid g(1000);
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 1000));
  for (const auto& lambda : {vec2(1, 0), vec2(0, 1), vec2(M_SQRT1_2, M_SQRT1_2), vec2(0.5, 0.5)}) {
    const CurvatureReport r = quadratic_form(ref, ts::zero_multipliers(lambda, g, 2), ts::ramp_direction(g));
    EXPECT_NEAR(r.q_value, -4.0 / 3.0 * lambda.sum(), 1e-6);
    EXPECT_EQ(r.dynamics_term, 0.0);
    EXPECT_EQ(r.constraint_term, 0.0);
    EXPECT_EQ(r.q_value, r.cost_term);
    EXPECT_NEAR(r.direction_norm, std::sqrt(2.0), 1e-12);
  }
}

TEST(QuadraticForm, ZeroDirectionGivesZero) {
  const Problem p = ts::nonlinear_problem();
  const Grid g(30);
  std::mt19937 rng(2);
  const Trajectory traj = integrate_state(p, ts::smooth_controls(g, 2, rng, 0.2), g);
  const KktSolution sol = solve_kkt_system(p, traj, vec2(0.6, 0.8));
  const Direction zero = ts::ramp_direction(g).scaled(0.0);
  EXPECT_EQ(quadratic_form(p, traj, sol.triple, zero).q_value, 0.0);
}

TEST(QuadraticForm, ConvexExampleIsSumOfSquares) {
  const Problem p = builtin("example_6_1");
  const Grid g(200);
  const ReferenceData ref = linearize(p, ts::zero_trajectory(p, 200));
  std::mt19937 rng(6);
  for (int k = 0; k < 10; ++k) {
    const Direction d = random_direction(ref, rng);
    const double q = quadratic_form(ref, ts::zero_multipliers(vec2(0.5, 0.5), g, 2), d).q_value;
    const Eigen::VectorXd squares = d.x.rowwise().squaredNorm() + d.u.rowwise().squaredNorm();
    EXPECT_NEAR(q, quadrature(squares, g), 1e-12);
    EXPECT_GT(q, 0.0);
  }
}

TEST(QuadraticForm, HomogeneityAndDecomposition) {
  const Problem p = ts::nonlinear_problem();
  const Grid g(100);
  std::mt19937 rng(31);
  const Trajectory traj = integrate_state(p, ts::smooth_controls(g, 2, rng, 0.2), g);
  const ReferenceData ref = linearize(p, traj);
  const KktSolution sol = solve_kkt_system(p, traj, ref, vec2(0.6, 0.8));
  MultiplierTriple triple = sol.triple;
  triple.theta = Eigen::VectorXd::LinSpaced(g.nodes(), 0.1, 0.4);  // exercise the constraint term
  for (int k = 0; k < 20; ++k) {
    const Direction d = random_direction(ref, rng);
    const CurvatureReport r = quadratic_form(ref, triple, d);
    EXPECT_NEAR(r.cost_term + r.dynamics_term + r.constraint_term, r.q_value, 1e-12);
    EXPECT_NE(r.dynamics_term, 0.0);
    for (double alpha : {-1.0, 0.5, 2.0}) {
      const double scaled = quadratic_form(ref, triple, d.scaled(alpha)).q_value;
      EXPECT_LE(std::abs(scaled - alpha * alpha * r.q_value), 1e-10 * std::max(1.0, std::abs(r.q_value)));
    }
  }
}

TEST(Coercivity, ExampleValues) {
  const Problem p1 = builtin("example_6_1");
  const Problem p2 = builtin("example_6_2");
  const ReferenceData r1 = linearize(p1, ts::zero_trajectory(p1, 50));
  const ReferenceData r2 = linearize(p2, ts::zero_trajectory(p2, 50));
  const CoercivityReport a = coercivity_check(r1, vec2(0.5, 0.5), 1.0);
  EXPECT_TRUE(a.pass);
  EXPECT_NEAR(a.margin, 0.0, 1e-15);
  EXPECT_FALSE(coercivity_check(r2, vec2(0.5, 0.5), 0.1).pass);
  const CoercivityReport c = coercivity_check(r1, vec2(1, 0), 1.0);
  EXPECT_FALSE(c.pass);
  EXPECT_NEAR(c.min_eigenvalue, 0.0, 1e-15);
  EXPECT_NEAR(c.margin, -1.0, 1e-15);
}

TEST(WorstDirection, FindsNegativeCurvatureOnSaddleExample) {
  const Problem p = builtin("example_6_2");
  const Trajectory traj = ts::zero_trajectory(p, 1000);
  const KktSolution sol = solve_kkt_system(p, traj, vec2(M_SQRT1_2, M_SQRT1_2));
  const SearchResult r = worst_critical_direction(p, traj, sol.triple);
  EXPECT_LT(r.q_value, 0.0);
  EXPECT_FALSE(r.cone_trivial);
  const ReferenceData coarse = linearize(p, ts::zero_trajectory(p, 32));
  EXPECT_TRUE(is_critical(coarse, r.direction, ConeVariant::Sufficient, {1e-8, 1e-8}).pass);
}

TEST(WorstDirection, PositiveOnEveryRestartForConvexExample) {
  const Problem p = builtin("example_6_1");
  const Trajectory traj = ts::zero_trajectory(p, 1000);
  const KktSolution sol = solve_kkt_system(p, traj, vec2(0.5, 0.5));
  const CriticalConeSearch search(p, traj, sol.triple);
  std::mt19937_64 rng(17);
  for (int k = 0; k < 10; ++k) {
    const SearchResult r = search.run(rng);
    EXPECT_GT(r.q_value, 0.0);
    EXPECT_NEAR(l2_norm(r.direction.u, r.direction.grid), 1.0, 1e-10);
  }
}

// Oracle: the reduced Hessian is assembled column by column through
// polarization of quadratic_form, then diagonalised in the trapezoid metric.
TEST(WorstDirection, MatchesDenseReducedHessianEigenvalue) {
  const Problem p = unconstrained_fixture();
  const int N = 16;
  const Grid g(N);
  const Trajectory traj = ts::zero_trajectory(p, N);
  const ReferenceData ref = linearize(p, traj);
  const KktSolution sol = solve_kkt_system(p, traj, ref, vec2(0.6, 0.8));
  ASSERT_TRUE(sol.report.pass);

  const int D = g.nodes() * 2;
  auto q_of = [&](const Eigen::VectorXd& flat) {
    Direction d;
    d.grid = g;
    d.u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(),
                                                                                                  g.nodes(), 2);
    d.x = linearized_state(ref, d.u);
    return quadratic_form(ref, sol.triple, d).q_value;
  };
  Eigen::MatrixXd A(D, D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      const Eigen::VectorXd ea = Eigen::VectorXd::Unit(D, a), eb = Eigen::VectorXd::Unit(D, b);
      A(a, b) = 0.25 * (q_of(ea + eb) - q_of(ea - eb));
    }
  Eigen::VectorXd w(D);
  for (int i = 0; i < g.nodes(); ++i) w.segment(2 * i, 2).setConstant(g.weight(i));
  const Eigen::VectorXd s = w.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = s.asDiagonal() * A * s.asDiagonal();
  const double oracle = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (scaled + scaled.transpose()))
                            .eigenvalues()[0];

  SearchOptions options;
  options.grid_n = N;
  const SearchResult r = worst_critical_direction(p, traj, sol.triple, options, 3);
  EXPECT_NEAR(r.q_value, oracle, 1e-6);
  EXPECT_LT(oracle, 0.0);
  EXPECT_NEAR(quadratic_form(ref, sol.triple, r.direction).q_value, r.q_value, 1e-9);
}

TEST(SocnVerdict, SaddleExampleViolatedForEveryWeight) {
  const Problem p = builtin("example_6_2");
  const Trajectory traj = ts::zero_trajectory(p, 1000);
  const auto grid = simplex_grid(2, 20);
  ASSERT_EQ(grid.size(), 21u);
  const SocnVerdict v = socn_verdict(p, traj, {ts::ramp_direction(traj.grid)}, grid);
  EXPECT_FALSE(v.holds);
  ASSERT_TRUE(v.violating.has_value());
  EXPECT_EQ(*v.violating, 0);
  EXPECT_EQ(v.kkt_valid_lambdas, 21);
  for (const auto& probe : v.directions[0].probes) {
    EXPECT_LT(probe.q_value, 0.0);
    EXPECT_NEAR(probe.q_value, -4.0 / 3.0 * probe.lambda.sum(), 1e-6);
  }
}

TEST(SocnVerdict, ConvexExampleHoldsOnRandomCriticalDirections) {
  const Problem p = builtin("example_6_1");
  const Trajectory traj = ts::zero_trajectory(p, 1000);
  const ReferenceData ref = linearize(p, traj);
  std::mt19937_64 rng(42);
  std::vector<Direction> dirs;
  for (int k = 0; k < 100; ++k) dirs.push_back(random_critical_direction(ref, rng));
  const SocnVerdict v = socn_verdict(p, traj, dirs, simplex_grid(2, 20));
  EXPECT_TRUE(v.holds);
  EXPECT_EQ(v.tested, 100);
  EXPECT_FALSE(v.vacuous);
}

TEST(SocnVerdict, EmptyListIsVacuousAndNonCriticalIsSkipped) {
  const Problem p = builtin("example_6_2");
  const Trajectory traj = ts::zero_trajectory(p, 100);
  const SocnVerdict empty = socn_verdict(p, traj, {}, simplex_grid(2, 4));
  EXPECT_TRUE(empty.holds);
  EXPECT_TRUE(empty.vacuous);
  const SocnVerdict skipped = socn_verdict(p, traj, {ts::ramp_direction(traj.grid).scaled(-1.0)}, simplex_grid(2, 4));
  EXPECT_TRUE(skipped.holds);
  EXPECT_EQ(skipped.skipped, 1);
  EXPECT_TRUE(skipped.vacuous);
}

TEST(SocsVerdict, ConvexExamplePasses) {
  const Problem p = builtin("example_6_1");
  const Trajectory traj = ts::zero_trajectory(p, 1000);
  const KktSolution sol = solve_kkt_system(p, traj, vec2(0.5, 0.5));
  const SocsVerdict v = socs_verdict(p, traj, sol.triple, 1.0, 20);
  EXPECT_TRUE(v.pass);
  EXPECT_TRUE(v.failed_stage.empty());
  EXPECT_EQ(v.probes.size(), 20u);
  for (const auto& probe : v.probes) EXPECT_GT(probe.q_value, 0.0);
}

TEST(SocsVerdict, CoercivityFailures) {
  const Problem p2 = builtin("example_6_2");
  const Trajectory t2 = ts::zero_trajectory(p2, 200);
  const SocsVerdict a = socs_verdict(p2, t2, solve_kkt_system(p2, t2, vec2(0.5, 0.5)).triple, 0.1, 5);
  EXPECT_FALSE(a.pass);
  EXPECT_EQ(a.failed_stage, "coercivity");
  EXPECT_TRUE(a.probes.empty());

  const Problem p1 = builtin("example_6_1");
  const Trajectory t1 = ts::zero_trajectory(p1, 200);
  const SocsVerdict b = socs_verdict(p1, t1, solve_kkt_system(p1, t1, vec2(0.5, 0.5)).triple, 3.0, 5);
  EXPECT_TRUE(b.kkt.pass);
  EXPECT_FALSE(b.pass);
  EXPECT_EQ(b.failed_stage, "coercivity");
}
