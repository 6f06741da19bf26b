#pragma once

// Second-order analysis along a reference trajectory: critical-cone
// membership, the curvature form
//
//   Q(z) = ∫ zᵀ( Σ_j λ_j ∇²L_j + Σ_i p_i ∇²φ_i + θ ∇²g ) z dt,   z = (x, u),
//
// the Legendre-type coercivity of λᵀL_uu, and a heuristic search for the
// critical direction minimising Q on the unit L2 sphere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mocp/grid.hpp"
#include "mocp/kkt.hpp"
#include "mocp/problem.hpp"
#include "mocp/reference.hpp"
#include "mocp/solvers.hpp"
#include "mocp/trajectory.hpp"
#include "mocp/weights.hpp"

namespace mocp {

/// Necessary-condition cone 𝒞 or sufficient-condition cone 𝒞′. On the grid
/// both reduce to the same node-wise test; the variant is kept as metadata.
enum class ConeVariant { Necessary, Sufficient };

inline const char* to_string(ConeVariant v) { return v == ConeVariant::Necessary ? "C" : "C'"; }

struct ConeOptions {
  double eps_act = 1e-8;  // nodes with g[t] >= -eps_act are active
  double tol = 1e-8;
};

struct ConeMembership {
  ConeVariant variant = ConeVariant::Sufficient;
  std::vector<double> c1_values;  // ∫(L_jx x + L_ju u) dt per objective
  double c1_residual = 0.0;
  double c2_residual = 0.0;
  double c3_residual = 0.0;
  std::vector<int> active_set;
  ConeOptions options;
  bool pass = false;
};

inline ConeMembership is_critical(const ReferenceData& ref, const Direction& dir, ConeVariant variant,
                                  const ConeOptions& options = {}) {
  if (!(dir.grid == ref.grid)) throw GridError("direction and reference trajectory live on different grids");
  require_shape(dir, ref.n, ref.l);
  ConeMembership cone;
  cone.variant = variant;
  cone.options = options;
  const int nodes = ref.grid.nodes();

  Eigen::VectorXd integrand(nodes);
  for (int j = 0; j < ref.m; ++j) {
    for (int i = 0; i < nodes; ++i) {
      const auto& grad = ref.cost_grad[static_cast<std::size_t>(i)];
      integrand[i] = grad.row(j).head(ref.n).dot(dir.x.row(i)) + grad.row(j).tail(ref.l).dot(dir.u.row(i));
    }
    const double value = quadrature(integrand, ref.grid);
    cone.c1_values.push_back(value);
    cone.c1_residual = std::max(cone.c1_residual, value);
  }

  cone.c2_residual = max_norm(dir.x - linearized_state(ref, dir.u));

  for (int i = 0; i < nodes; ++i) {
    if (ref.constraint[i] < -options.eps_act) continue;
    cone.active_set.push_back(i);
    const double lin = ref.con_grad.row(i).head(ref.n).dot(dir.x.row(i)) +
                       ref.con_grad.row(i).tail(ref.l).dot(dir.u.row(i));
    cone.c3_residual = std::max(cone.c3_residual, lin);
  }
  cone.pass = cone.c1_residual <= options.tol && cone.c2_residual <= options.tol && cone.c3_residual <= options.tol;
  return cone;
}

inline ConeMembership is_critical(const Problem& problem, const Trajectory& traj, const Direction& dir,
                                  ConeVariant variant, const ConeOptions& options = {}) {
  return is_critical(linearize(problem, traj, false), dir, variant, options);
}

// ---------------------------------------------------------------------------

struct CurvatureReport {
  double q_value = 0.0;
  double cost_term = 0.0;        // ∫ zᵀ Σ λ_j ∇²L_j z
  double dynamics_term = 0.0;    // ∫ zᵀ Σ p_i ∇²φ_i z
  double constraint_term = 0.0;  // ∫ θ zᵀ ∇²g z
  double direction_norm = 0.0;   // L2 norm of the control part
  double direction_max_norm = 0.0;
};

/// Hessian of the Lagrangian-type integrand at node i.
inline Eigen::MatrixXd node_hessian(const ReferenceData& ref, const MultiplierTriple& triple, int i) {
  const auto s = static_cast<std::size_t>(i);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ref.nz(), ref.nz());
  for (int j = 0; j < ref.m; ++j) H += triple.lambda[j] * ref.cost_hess[s][static_cast<std::size_t>(j)];
  for (int c = 0; c < ref.n; ++c) H += triple.p(i, c) * ref.dyn_hess[s][static_cast<std::size_t>(c)];
  H += triple.theta[i] * ref.con_hess[s];
  return H;
}

inline CurvatureReport quadratic_form(const ReferenceData& ref, const MultiplierTriple& triple, const Direction& dir) {
  if (!ref.has_hessians) throw KktError("reference data was built without Hessians");
  if (!(dir.grid == ref.grid)) throw GridError("direction and reference trajectory live on different grids");
  require_shape(dir, ref.n, ref.l);
  const int nodes = ref.grid.nodes();
  if (triple.p.rows() != nodes || triple.theta.size() != nodes) throw KktError("multipliers do not match the grid");
  Eigen::VectorXd cost(nodes), dyn(nodes), con(nodes);
  Eigen::VectorXd z(ref.nz());
  for (int i = 0; i < nodes; ++i) {
    const auto s = static_cast<std::size_t>(i);
    z << dir.x.row(i).transpose(), dir.u.row(i).transpose();
    double c = 0.0;
    for (int j = 0; j < ref.m; ++j) c += triple.lambda[j] * z.dot(ref.cost_hess[s][static_cast<std::size_t>(j)] * z);
    double d = 0.0;
    for (int k = 0; k < ref.n; ++k) d += triple.p(i, k) * z.dot(ref.dyn_hess[s][static_cast<std::size_t>(k)] * z);
    cost[i] = c;
    dyn[i] = d;
    con[i] = triple.theta[i] * z.dot(ref.con_hess[s] * z);
  }
  CurvatureReport report;
  report.cost_term = quadrature(cost, ref.grid);
  report.dynamics_term = quadrature(dyn, ref.grid);
  report.constraint_term = quadrature(con, ref.grid);
  report.q_value = report.cost_term + report.dynamics_term + report.constraint_term;
  report.direction_norm = l2_norm(dir.u, ref.grid);
  report.direction_max_norm = max_norm(dir.u);
  return report;
}

inline CurvatureReport quadratic_form(const Problem& problem, const Trajectory& traj, const MultiplierTriple& triple,
                                      const Direction& dir) {
  return quadratic_form(linearize(problem, traj), triple, dir);
}

// ---------------------------------------------------------------------------

struct CoercivityReport {
  double gamma0 = 0.0;
  double min_eigenvalue = 0.0;
  int worst_node = 0;
  double margin = 0.0;  // min_eigenvalue - gamma0
  bool pass = false;
};

/// Smallest eigenvalue over the grid of Σ_j λ_j L_{j,uu}[t_i] against gamma0.
inline CoercivityReport coercivity_check(const ReferenceData& ref, const Eigen::VectorXd& lambda, double gamma0) {
  if (!ref.has_hessians) throw KktError("reference data was built without Hessians");
  check_weights(lambda, ref.m);
  CoercivityReport report;
  report.gamma0 = gamma0;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd Huu(ref.l, ref.l);
  for (int i = 0; i < ref.grid.nodes(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    Huu.setZero();
    for (int j = 0; j < ref.m; ++j)
      Huu += lambda[j] * ref.cost_hess[s][static_cast<std::size_t>(j)].bottomRightCorner(ref.l, ref.l);
    const Eigen::MatrixXd sym = 0.5 * (Huu + Huu.transpose());
    const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues()[0];
    if (lowest < report.min_eigenvalue) {
      report.min_eigenvalue = lowest;
      report.worst_node = i;
    }
  }
  report.margin = report.min_eigenvalue - gamma0;
  report.pass = report.min_eigenvalue >= gamma0;
  return report;
}

inline CoercivityReport coercivity_check(const Problem& problem, const Trajectory& traj, const Eigen::VectorXd& lambda,
                                         double gamma0) {
  return coercivity_check(linearize(problem, traj), lambda, gamma0);
}

// ---------------------------------------------------------------------------
// Worst critical direction
//
// The search runs on a (usually coarser) search grid. Nodal controls U are
// the unknowns, the state part is eliminated through the dense linearized
// state map S, and in the scaled variable V = W^{1/2} U (W = trapezoid
// weights) the problem reads
//
//   min VᵀÃV   s.t.  C̃V <= 0,  |V| = 1,
//
// where the rows of C̃ are the objective inequalities and the linearized
// constraint at every active node. Projection onto the polyhedral cone uses
// the Moreau decomposition: P(Y) = Y - C̃ᵀμ with μ the NNLS solution of
// min_{μ>=0} |C̃ᵀμ - Y|.

struct SearchOptions {
  int grid_n = 32;
  int max_iters = 500;
  double step_tol = 1e-10;
  int polish_every = 10;  // iterations between face polishes
  ConeOptions cone;
};

struct SearchResult {
  Direction direction;        // on the search grid, |u|_2 = 1
  double q_value = 0.0;
  bool converged = false;
  bool cone_trivial = false;  // no nonzero critical direction was found
  int iterations = 0;
};

class CriticalConeSearch {
 public:
  CriticalConeSearch(const Problem& problem, const Trajectory& traj, const MultiplierTriple& triple,
                     const SearchOptions& options = {})
      : options_(options), grid_(options.grid_n) {
    Trajectory coarse;
    coarse.grid = grid_;
    coarse.x = resample(traj.x, traj.grid, grid_);
    coarse.u = resample(traj.u, traj.grid, grid_);
    triple_.lambda = triple.lambda;
    triple_.p = resample(triple.p, traj.grid, grid_);
    triple_.theta = resample(triple.theta, traj.grid, grid_);
    ref_ = linearize(problem, coarse);
    assemble();
  }

  const ReferenceData& reference() const noexcept { return ref_; }
  const MultiplierTriple& multipliers() const noexcept { return triple_; }
  const Grid& grid() const noexcept { return grid_; }
  int dimension() const noexcept { return static_cast<int>(A_.rows()); }

  /// Reduced Hessian in nodal controls: Q(U) = Uᵀ A U.
  const Eigen::MatrixXd& reduced_hessian() const noexcept { return A_; }
  /// Quadrature weights of the control unknowns.
  const Eigen::VectorXd& weights() const noexcept { return w_; }

  /// One projected-gradient restart from a random start drawn from `rng`,
  /// finished by a Rayleigh–Ritz polish on the identified active face.
  template <typename Rng>
  SearchResult run(Rng& rng) const {
    SearchResult result;
    const Eigen::Index D = At_.rows();
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::VectorXd v;
    for (int attempt = 0; attempt < 20 && v.size() == 0; ++attempt) {
      Eigen::VectorXd y(D);
      for (Eigen::Index k = 0; k < D; ++k) y[k] = normal(rng);
      Eigen::VectorXd projected = project(y);
      if (projected.norm() > 1e-8 * y.norm()) v = projected / projected.norm();
    }
    if (v.size() == 0) {
      result.cone_trivial = true;
      result.direction = to_direction(Eigen::VectorXd::Zero(D));
      return result;
    }

    const double eta = spectral_radius_ > 0.0 ? 0.5 / spectral_radius_ : 0.0;
    double best_q = v.dot(At_ * v);
    Eigen::VectorXd best = v;
    auto step_from = [&](const Eigen::VectorXd& from) -> Eigen::VectorXd {
      Eigen::VectorXd next = project(from - eta * 2.0 * (At_ * from));
      const double norm = next.norm();
      return norm < 1e-14 ? Eigen::VectorXd() : Eigen::VectorXd(next / norm);
    };
    for (int it = 0; it < options_.max_iters; ++it) {
      result.iterations = it + 1;
      Eigen::VectorXd next = step_from(v);
      if (next.size() == 0) break;
      const double step = (next - v).norm();
      v = std::move(next);
      const double q = v.dot(At_ * v);
      if (q < best_q) {
        best_q = q;
        best = v;
      }
      if (step <= options_.step_tol) {
        result.converged = true;
        break;
      }
      if ((it + 1) % options_.polish_every == 0) {
        // A polished point that the projected step leaves in place is a
        // stationary point of the constrained Rayleigh quotient.
        Eigen::VectorXd candidate = best;
        double candidate_q = best_q;
        polish(candidate, candidate_q);
        const Eigen::VectorXd moved = step_from(candidate);
        if (candidate_q < best_q) {
          best_q = candidate_q;
          best = candidate;
          v = candidate;
        }
        if (moved.size() != 0 && (moved - candidate).norm() <= 1e-9) {
          result.converged = true;
          break;
        }
      }
    }
    polish(best, best_q);
    result.q_value = best_q;
    result.direction = to_direction(best);
    return result;
  }

  /// Maps a scaled unknown V back to a direction on the search grid.
  Direction to_direction(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd U = v.cwiseQuotient(w_.cwiseSqrt());
    Direction dir;
    dir.grid = grid_;
    dir.u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        U.data(), grid_.nodes(), ref_.l);
    dir.x = linearized_state(ref_, dir.u);
    return dir;
  }

 private:
  void assemble() {
    const int n = ref_.n, l = ref_.l, nodes = grid_.nodes();
    const Eigen::Index D = static_cast<Eigen::Index>(nodes) * l;

    // Dense linearized state map, one column per unit nodal control.
    Eigen::MatrixXd S(static_cast<Eigen::Index>(nodes) * n, D);
    Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(nodes, l);
    for (Eigen::Index k = 0; k < D; ++k) {
      unit(k / l, k % l) = 1.0;
      const Eigen::MatrixXd x = linearized_state(ref_, unit);
      unit(k / l, k % l) = 0.0;
      for (int i = 0; i < nodes; ++i) S.block(static_cast<Eigen::Index>(i) * n, k, n, 1) = x.row(i).transpose();
    }

    w_.resize(D);
    A_ = Eigen::MatrixXd::Zero(D, D);
    Eigen::MatrixXd Z(n + l, D);
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<Eigen::RowVectorXd> objective_rows(static_cast<std::size_t>(ref_.m), Eigen::RowVectorXd::Zero(D));
    for (int i = 0; i < nodes; ++i) {
      const double w = grid_.weight(i);
      for (int r = 0; r < l; ++r) w_[static_cast<Eigen::Index>(i) * l + r] = w;
      Z.topRows(n) = S.middleRows(static_cast<Eigen::Index>(i) * n, n);
      Z.bottomRows(l).setZero();
      for (int r = 0; r < l; ++r) Z(n + r, static_cast<Eigen::Index>(i) * l + r) = 1.0;
      const Eigen::MatrixXd H = node_hessian(ref_, triple_, i);
      A_.noalias() += w * Z.transpose() * (0.5 * (H + H.transpose())) * Z;
      for (int j = 0; j < ref_.m; ++j)
        objective_rows[static_cast<std::size_t>(j)] += w * ref_.cost_grad[static_cast<std::size_t>(i)].row(j) * Z;
      if (ref_.constraint[i] >= -options_.cone.eps_act) rows.push_back(ref_.con_grad.row(i) * Z);
    }
    A_ = 0.5 * (A_ + A_.transpose());
    for (auto& r : objective_rows) rows.push_back(r);

    const Eigen::VectorXd inv_sqrt_w = w_.cwiseSqrt().cwiseInverse();
    At_ = inv_sqrt_w.asDiagonal() * A_ * inv_sqrt_w.asDiagonal();
    std::vector<Eigen::RowVectorXd> kept;
    for (const auto& r : rows) {
      Eigen::RowVectorXd scaled = r.cwiseProduct(inv_sqrt_w.transpose());
      if (scaled.norm() > 1e-14) kept.push_back(scaled);
    }
    Ct_.resize(static_cast<Eigen::Index>(kept.size()), D);
    for (std::size_t k = 0; k < kept.size(); ++k) Ct_.row(static_cast<Eigen::Index>(k)) = kept[k];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(At_);
    spectral_radius_ = eig.eigenvalues().cwiseAbs().maxCoeff();
  }

  Eigen::VectorXd project(const Eigen::VectorXd& y) const {
    if (Ct_.rows() == 0) return y;
    if ((Ct_ * y).maxCoeff() <= 0.0) return y;
    const NnlsResult mu = nnls(Ct_.transpose(), y);
    return y - Ct_.transpose() * mu.x;
  }

  bool feasible(const Eigen::VectorXd& v) const {
    for (Eigen::Index r = 0; r < Ct_.rows(); ++r)
      if (Ct_.row(r).dot(v) > 1e-10 * Ct_.row(r).norm()) return false;
    return true;
  }

  // Minimises the Rayleigh quotient exactly on the face cut out by the
  // constraints active at `v`; accepts the eigenvector if it stays feasible.
  void polish(Eigen::VectorXd& v, double& q) const {
    std::vector<Eigen::Index> active;
    for (Eigen::Index r = 0; r < Ct_.rows(); ++r)
      if (Ct_.row(r).dot(v) >= -1e-7 * Ct_.row(r).norm()) active.push_back(r);
    std::vector<std::vector<Eigen::Index>> faces{{}, active};
    for (const auto& face : faces) {
      Eigen::MatrixXd basis;
      if (face.empty()) {
        basis = Eigen::MatrixXd::Identity(At_.rows(), At_.rows());
      } else {
        Eigen::MatrixXd B(static_cast<Eigen::Index>(face.size()), At_.cols());
        for (std::size_t k = 0; k < face.size(); ++k) B.row(static_cast<Eigen::Index>(k)) = Ct_.row(face[k]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        lu.setThreshold(1e-10);
        basis = lu.kernel();
        if (basis.cols() == 0 || basis.norm() == 0.0) continue;
        basis = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() *
                Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
      }
      const Eigen::MatrixXd restricted = basis.transpose() * At_ * basis;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (restricted + restricted.transpose()));
      Eigen::VectorXd candidate = basis * eig.eigenvectors().col(0);
      candidate /= candidate.norm();
      for (const double sign : {1.0, -1.0}) {
        const Eigen::VectorXd c = sign * candidate;
        if (!feasible(c)) continue;
        const double cq = c.dot(At_ * c);
        if (cq < q) {
          q = cq;
          v = c;
        }
      }
    }
  }

  SearchOptions options_;
  Grid grid_;
  MultiplierTriple triple_;
  ReferenceData ref_;
  Eigen::VectorXd w_;
  Eigen::MatrixXd A_, At_, Ct_;
  double spectral_radius_ = 0.0;
};

/// Best direction over `restarts` projected-gradient runs. A heuristic
/// witness for the minimum of Q on the cone, not a certified global minimum.
inline SearchResult worst_critical_direction(const Problem& problem, const Trajectory& traj,
                                             const MultiplierTriple& triple, const SearchOptions& options = {},
                                             int restarts = 1, std::uint64_t seed = 42) {
  const CriticalConeSearch search(problem, traj, triple, options);
  std::mt19937_64 rng(seed);
  SearchResult best;
  best.q_value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    SearchResult candidate = search.run(rng);
    if (candidate.cone_trivial) return candidate;
    if (candidate.q_value < best.q_value) best = std::move(candidate);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Random critical directions on the reference grid

/// Draws a smooth random control, then sweeps forward in time and corrects
/// the i0-th control component wherever the linearized constraint at an
/// active node would be violated. The linearized dynamics hold exactly; the
/// objective inequalities are not enforced, so callers still run
/// is_critical. The result is scaled to |u|_2 = 1, or is zero when every
/// draw collapses under the correction.
template <typename Rng>
Direction random_critical_direction(const ReferenceData& ref, Rng& rng, const ConeOptions& options = {}) {
  const int nodes = ref.grid.nodes();
  const int i0 = select_control_index(ref);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kModes = 4;
  constexpr int kAttempts = 20;
  Eigen::MatrixXd u(nodes, ref.l);

  auto constraint_value = [&](int i, const Eigen::VectorXd& x) {
    return ref.con_grad.row(i).head(ref.n).dot(x) + ref.con_grad.row(i).tail(ref.l).dot(u.row(i));
  };
  auto active = [&](int i) { return ref.constraint[i] >= -options.eps_act; };

  // Draws whose corrected norm drops below 1e-6 of the drawn norm are redrawn.
  double norm = 0.0;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    for (int r = 0; r < ref.l; ++r) {
      double coeffs[2 * kModes];
      for (double& c : coeffs) c = normal(rng);
      for (int i = 0; i < nodes; ++i) {
        const double t = ref.grid.node(i);
        double v = 0.0;
        for (int k = 0; k < kModes; ++k)
          v += (coeffs[2 * k] * std::cos(k * M_PI * t) + coeffs[2 * k + 1] * std::sin((k + 1) * M_PI * t)) / (1.0 + k);
        u(i, r) = v;
      }
    }
    const double drawn = l2_norm(u, ref.grid);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(ref.n);
    if (active(0)) {
      const double c = constraint_value(0, x);
      if (c > 0.0) u(0, i0) -= c / ref.con_grad(0, ref.n + i0);
    }
    for (int i = 0; i < ref.grid.intervals(); ++i) {
      Eigen::VectorXd next = linearized_step(ref, i, x, u.row(i).transpose(), u.row(i + 1).transpose());
      if (active(i + 1)) {
        const double c = constraint_value(i + 1, next);
        if (c > 0.0) {
          const Eigen::VectorXd unit_shift =
              linearized_step(ref, i, Eigen::VectorXd::Zero(ref.n), Eigen::VectorXd::Zero(ref.l),
                              Eigen::VectorXd::Unit(ref.l, i0));
          const double slope = ref.con_grad.row(i + 1).head(ref.n).dot(unit_shift) + ref.con_grad(i + 1, ref.n + i0);
          if (std::abs(slope) > 1e-12) {
            u(i + 1, i0) -= c / slope;
            next = linearized_step(ref, i, x, u.row(i).transpose(), u.row(i + 1).transpose());
          }
        }
      }
      x = next;
    }
    norm = l2_norm(u, ref.grid);
    if (norm > 1e-6 * drawn) break;
    u.setZero();
    norm = 0.0;
  }
  Direction dir;
  dir.grid = ref.grid;
  dir.u = norm > 0.0 ? Eigen::MatrixXd(u / norm) : u;
  dir.x = linearized_state(ref, dir.u);
  return dir;
}

// ---------------------------------------------------------------------------
// Verdicts

struct LambdaProbe {
  Eigen::VectorXd lambda;
  bool kkt_pass = false;
  double q_value = 0.0;
};

struct DirectionOutcome {
  int index = 0;
  ConeMembership cone;
  bool tested = false;     // false when the direction failed is_critical
  bool satisfied = false;  // some KKT-valid λ gives Q >= -tol
  double best_q = -std::numeric_limits<double>::infinity();
  std::vector<LambdaProbe> probes;
};

struct SocnVerdict {
  std::vector<DirectionOutcome> directions;
  std::vector<KktReport> kkt_reports;  // one per grid weight
  int tested = 0;
  int skipped = 0;
  int kkt_valid_lambdas = 0;
  std::optional<int> violating;  // index of the first violating direction
  bool vacuous = false;          // no direction was tested
  bool holds = true;
  double tol = 1e-8;
};

/// For every critical direction, asks whether SOME weight λ on the grid
/// admits KKT multipliers with Q >= -tol. Multipliers depend only on λ here,
/// so the KKT system is solved once per grid point.
inline SocnVerdict socn_verdict(const Problem& problem, const Trajectory& traj, const std::vector<Direction>& directions,
                                const std::vector<Eigen::VectorXd>& lambda_grid, const KktTolerances& kkt_tol = {},
                                const ConeOptions& cone_options = {}) {
  const ReferenceData ref = linearize(problem, traj);
  SocnVerdict verdict;
  verdict.tol = cone_options.tol;
  std::vector<KktSolution> solutions;
  solutions.reserve(lambda_grid.size());
  for (const auto& lambda : lambda_grid) {
    solutions.push_back(solve_kkt_system(problem, traj, ref, lambda, kkt_tol));
    verdict.kkt_reports.push_back(solutions.back().report);
    if (solutions.back().report.pass) ++verdict.kkt_valid_lambdas;
  }
  for (std::size_t d = 0; d < directions.size(); ++d) {
    DirectionOutcome outcome;
    outcome.index = static_cast<int>(d);
    outcome.cone = is_critical(ref, directions[d], ConeVariant::Necessary, cone_options);
    if (!outcome.cone.pass) {
      ++verdict.skipped;
      verdict.directions.push_back(std::move(outcome));
      continue;
    }
    outcome.tested = true;
    ++verdict.tested;
    for (const auto& sol : solutions) {
      LambdaProbe probe{sol.triple.lambda, sol.report.pass, 0.0};
      probe.q_value = quadratic_form(ref, sol.triple, directions[d]).q_value;
      if (probe.kkt_pass) {
        outcome.best_q = std::max(outcome.best_q, probe.q_value);
        if (probe.q_value >= -cone_options.tol) outcome.satisfied = true;
      }
      outcome.probes.push_back(std::move(probe));
    }
    if (!outcome.satisfied && !verdict.violating) verdict.violating = outcome.index;
    verdict.directions.push_back(std::move(outcome));
  }
  verdict.vacuous = verdict.tested == 0;
  verdict.holds = !verdict.violating.has_value();
  return verdict;
}

struct ProbeResult {
  double q_value = 0.0;
  double direction_norm = 0.0;  // L2 norm of the control part
  bool converged = false;
  bool cone_trivial = false;
};

struct SocsVerdict {
  KktReport kkt;
  CoercivityReport coercivity;
  std::vector<ProbeResult> probes;
  double min_probe_q = std::numeric_limits<double>::infinity();
  std::optional<Direction> worst_direction;  // on the search grid
  int search_grid_n = 0;
  double tol = 1e-8;
  std::string failed_stage;  // empty on pass; "kkt", "coercivity" or "curvature"
  bool pass = false;
};

/// KKT residuals, coercivity of λᵀL_uu, then n_probes restarts of the
/// worst-direction search requiring Q > tol on the unit sphere. Positivity
/// on the whole cone is only verified on the probes.
inline SocsVerdict socs_verdict(const Problem& problem, const Trajectory& traj, const MultiplierTriple& triple,
                                double gamma0, int n_probes, std::uint64_t seed = 42,
                                const KktTolerances& kkt_tol = {}, const SearchOptions& search = {}) {
  const ReferenceData ref = linearize(problem, traj);
  SocsVerdict verdict;
  verdict.tol = search.cone.tol;
  verdict.kkt = kkt_residuals(problem, traj, ref, triple, kkt_tol);
  verdict.coercivity = coercivity_check(ref, triple.lambda, gamma0);
  if (!verdict.kkt.pass) {
    verdict.failed_stage = "kkt";
    return verdict;
  }
  if (!verdict.coercivity.pass) {
    verdict.failed_stage = "coercivity";
    return verdict;
  }
  const CriticalConeSearch cone_search(problem, traj, triple, search);
  verdict.search_grid_n = cone_search.grid().intervals();
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_probes; ++k) {
    SearchResult r = cone_search.run(rng);
    verdict.probes.push_back({r.q_value, l2_norm(r.direction.u, r.direction.grid), r.converged, r.cone_trivial});
    if (r.cone_trivial) continue;
    if (r.q_value < verdict.min_probe_q) {
      verdict.min_probe_q = r.q_value;
      verdict.worst_direction = std::move(r.direction);
    }
  }
  const bool positive = verdict.min_probe_q > verdict.tol;
  verdict.pass = positive;
  if (!positive) verdict.failed_stage = "curvature";
  return verdict;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ConeMembership& c) {
  return {{"variant", to_string(c.variant)},
          {"c1_values", c.c1_values},
          {"c1_residual", c.c1_residual},
          {"c2_residual", c.c2_residual},
          {"c3_residual", c.c3_residual},
          {"active_nodes", c.active_set.size()},
          {"eps_act", c.options.eps_act},
          {"tol", c.options.tol},
          {"discrete_surrogate", true},
          {"pass", c.pass}};
}

inline nlohmann::json to_json(const CurvatureReport& r) {
  return {{"q_value", r.q_value},
          {"cost_term", r.cost_term},
          {"dynamics_term", r.dynamics_term},
          {"constraint_term", r.constraint_term},
          {"direction_l2_norm", r.direction_norm},
          {"direction_max_norm", r.direction_max_norm}};
}

inline nlohmann::json to_json(const CoercivityReport& r) {
  return {{"gamma0", r.gamma0},
          {"min_eigenvalue", r.min_eigenvalue},
          {"worst_node", r.worst_node},
          {"margin", r.margin},
          {"pass", r.pass}};
}

}  // namespace mocp
