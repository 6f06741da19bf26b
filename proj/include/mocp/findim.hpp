#pragma once

// Desk-scale vector program: minimise f(z) = (f_1..f_m)(z) subject to
// G(z) <= 0 componentwise, z in R^nz.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mocp/expr.hpp"
#include "mocp/problem.hpp"
#include "mocp/solvers.hpp"
#include "mocp/weights.hpp"

namespace mocp {

class FinDimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DirectionNotCriticalError : public FinDimError {
 public:
  using FinDimError::FinDimError;
};

/// Scalar function of z1..znz with symbolic gradient and Hessian.
struct FinDimField {
  Expr value;
  std::vector<Expr> gradient;
  std::vector<Expr> hessian;  // row-major nz x nz

  static FinDimField build(const Expr& f, int nz) {
    FinDimField field;
    field.value = f;
    for (int a = 0; a < nz; ++a) field.gradient.push_back(simplify(differentiate(f, a)));
    for (int a = 0; a < nz; ++a)
      for (int b = 0; b < nz; ++b)
        field.hessian.push_back(simplify(differentiate(field.gradient[static_cast<std::size_t>(a)], b)));
    return field;
  }

  double eval(const Eigen::VectorXd& z) const { return evaluate(value, {z.data(), static_cast<std::size_t>(z.size())}); }

  Eigen::VectorXd grad(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index a = 0; a < z.size(); ++a)
      out[a] = evaluate(gradient[static_cast<std::size_t>(a)], {z.data(), static_cast<std::size_t>(z.size())});
    return out;
  }

  Eigen::MatrixXd hess(const Eigen::VectorXd& z) const {
    const Eigen::Index k = z.size();
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        out(a, b) = evaluate(hessian[static_cast<std::size_t>(a * k + b)], {z.data(), static_cast<std::size_t>(k)});
    return out;
  }
};

class FinDimProblem {
 public:
  FinDimProblem(std::string name, int nz, int m, std::vector<std::string> f, std::vector<std::string> G)
      : name_(std::move(name)), nz_(nz), m_(m), f_sources_(std::move(f)), g_sources_(std::move(G)),
        vars_(VariableSet::indexed("z", nz)) {
    using K = ProblemError::Kind;
    if (nz < 1 || m < 1) throw ProblemError(K::Dimension, "nz and m must be positive");
    if (static_cast<int>(f_sources_.size()) != m)
      throw ProblemError(K::Dimension, "f has " + std::to_string(f_sources_.size()) + " entries, expected m = " +
                                           std::to_string(m));
    for (std::size_t j = 0; j < f_sources_.size(); ++j)
      objectives_.push_back(FinDimField::build(parse_field(f_sources_[j], "f[" + std::to_string(j) + "]"), nz));
    for (std::size_t k = 0; k < g_sources_.size(); ++k)
      constraints_.push_back(FinDimField::build(parse_field(g_sources_[k], "G[" + std::to_string(k) + "]"), nz));
  }

  const std::string& name() const noexcept { return name_; }
  int nz() const noexcept { return nz_; }
  int m() const noexcept { return m_; }
  int nE() const noexcept { return static_cast<int>(constraints_.size()); }
  const std::vector<std::string>& objective_sources() const noexcept { return f_sources_; }
  const std::vector<std::string>& constraint_sources() const noexcept { return g_sources_; }
  const FinDimField& objective(int j) const { return objectives_.at(static_cast<std::size_t>(j)); }
  const FinDimField& constraint(int k) const { return constraints_.at(static_cast<std::size_t>(k)); }

  Eigen::VectorXd f(const Eigen::VectorXd& z) const {
    check(z);
    Eigen::VectorXd out(m_);
    for (int j = 0; j < m_; ++j) out[j] = objective(j).eval(z);
    return out;
  }

  Eigen::VectorXd G(const Eigen::VectorXd& z) const {
    check(z);
    Eigen::VectorXd out(nE());
    for (int k = 0; k < nE(); ++k) out[k] = constraint(k).eval(z);
    return out;
  }

  /// m x nz
  Eigen::MatrixXd f_jacobian(const Eigen::VectorXd& z) const {
    check(z);
    Eigen::MatrixXd out(m_, nz_);
    for (int j = 0; j < m_; ++j) out.row(j) = objective(j).grad(z).transpose();
    return out;
  }

  /// nE x nz
  Eigen::MatrixXd G_jacobian(const Eigen::VectorXd& z) const {
    check(z);
    Eigen::MatrixXd out(nE(), nz_);
    for (int k = 0; k < nE(); ++k) out.row(k) = constraint(k).grad(z).transpose();
    return out;
  }

 private:
  Expr parse_field(const std::string& source, const std::string& field) const {
    try {
      return parse(source, vars_);
    } catch (const ExprError& e) {
      throw ProblemError(ProblemError::Kind::Expression, field + ": " + e.what());
    }
  }

  void check(const Eigen::VectorXd& z) const {
    if (z.size() != nz_)
      throw FinDimError("point has dimension " + std::to_string(z.size()) + ", expected " + std::to_string(nz_));
  }

  std::string name_;
  int nz_, m_;
  std::vector<std::string> f_sources_, g_sources_;
  VariableSet vars_;
  std::vector<FinDimField> objectives_, constraints_;
};

inline nlohmann::json to_json(const FinDimProblem& p) {
  nlohmann::json j{{"nz", p.nz()}, {"m", p.m()}, {"f", p.objective_sources()}, {"G", p.constraint_sources()}};
  if (!p.name().empty()) j["name"] = p.name();
  return j;
}

inline FinDimProblem load_findim_problem(const nlohmann::json& j) {
  using K = ProblemError::Kind;
  if (!j.is_object()) throw ProblemError(K::Schema, "problem document must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "nz" && key != "m" && key != "f" && key != "G" && key != "name")
      throw ProblemError(K::Schema, "unknown field '" + key + "'");
  const int nz = detail::positive_int_field(j, "nz");
  const int m = detail::positive_int_field(j, "m");
  auto f = detail::string_list_field(j, "f");
  auto G = detail::string_list_field(j, "G");
  std::string name;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ProblemError(K::Schema, "'name' must be a string");
    name = j.at("name").get<std::string>();
  }
  return FinDimProblem(std::move(name), nz, m, std::move(f), std::move(G));
}

inline std::string findim_hash(const FinDimProblem& p) {
  const std::string canonical = to_json(p).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

struct FinDimOptions {
  double active_tol = 1e-12;    // G_k >= -active_tol counts as active
  double feasibility_tol = 1e-10;
  double stationarity_tol = 1e-8;
  double curvature_tol = 1e-8;
  double membership_tol = 1e-10;
};

inline std::vector<int> active_constraints(const FinDimProblem& problem, const Eigen::VectorXd& zbar,
                                           const FinDimOptions& options = {}) {
  const Eigen::VectorXd g = problem.G(zbar);
  std::vector<int> active;
  for (int k = 0; k < g.size(); ++k)
    if (g[k] >= -options.active_tol) active.push_back(k);
  return active;
}

// ---------------------------------------------------------------------------

struct RobinsonReport {
  bool pass = false;
  double witness_s = 0.0;        // optimal s of the LP (0 when no row is active)
  Eigen::VectorXd witness_d;     // direction achieving it
  std::vector<int> active;
};

/// For the nonpositive orthant the condition asks for one d with
/// ∇G_k(z̄)·d < 0 at every active k. Decided by
///   max s  s.t.  ∇G_act d + s·1 <= 0,  |d|_inf <= 1
/// with d = d⁺ - d⁻ so that all LP variables are nonnegative.
inline RobinsonReport robinson_check(const FinDimProblem& problem, const Eigen::VectorXd& zbar,
                                     const FinDimOptions& options = {}) {
  const Eigen::VectorXd g = problem.G(zbar);
  if (g.size() > 0 && g.maxCoeff() > options.feasibility_tol)
    throw FinDimError("reference point is infeasible: max G_k = " + std::to_string(g.maxCoeff()));
  RobinsonReport report;
  report.active = active_constraints(problem, zbar, options);
  const int nz = problem.nz();
  report.witness_d = Eigen::VectorXd::Zero(nz);
  if (report.active.empty()) {
    report.pass = true;
    return report;
  }
  const Eigen::MatrixXd J = problem.G_jacobian(zbar);
  const int na = static_cast<int>(report.active.size());
  const int vars = 2 * nz + 1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(na + 2 * nz, vars);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(na + 2 * nz);
  for (int r = 0; r < na; ++r) {
    const Eigen::RowVectorXd row = J.row(report.active[static_cast<std::size_t>(r)]);
    M.block(r, 0, 1, nz) = row;
    M.block(r, nz, 1, nz) = -row;
    M(r, 2 * nz) = 1.0;
  }
  for (int i = 0; i < nz; ++i) {
    M(na + i, i) = 1.0;
    M(na + i, nz + i) = -1.0;
    M(na + nz + i, i) = -1.0;
    M(na + nz + i, nz + i) = 1.0;
    b[na + i] = 1.0;
    b[na + nz + i] = 1.0;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(vars);
  c[2 * nz] = 1.0;
  const LpResult lp = simplex_maximize(c, M, b);
  report.witness_s = lp.objective;
  report.witness_d = lp.y.head(nz) - lp.y.segment(nz, nz);
  report.pass = lp.status == LpResult::Status::Optimal && lp.objective > 1e-10;
  return report;
}

// ---------------------------------------------------------------------------

struct MultiplierPair {
  Eigen::VectorXd lambda;  // >= 0, unit Euclidean norm
  Eigen::VectorXd e;       // >= 0, zero off the active set
  double stationarity = 0.0;
  double complementarity = 0.0;
};

/// Sweeps λ over a simplex grid with step 1/divisions and fits e >= 0 on
/// the active set by NNLS. Only pairs with stationarity residual within
/// options.stationarity_tol are returned.
inline std::vector<MultiplierPair> multiplier_set_sample(const FinDimProblem& problem, const Eigen::VectorXd& zbar,
                                                         int divisions = 20, const FinDimOptions& options = {}) {
  const Eigen::MatrixXd Jf = problem.f_jacobian(zbar);
  const Eigen::MatrixXd JG = problem.G_jacobian(zbar);
  const Eigen::VectorXd g = problem.G(zbar);
  const std::vector<int> active = active_constraints(problem, zbar, options);
  Eigen::MatrixXd A(problem.nz(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = JG.row(active[k]).transpose();

  std::vector<MultiplierPair> pairs;
  for (const Eigen::VectorXd& lambda : simplex_grid(problem.m(), divisions)) {
    const Eigen::VectorXd target = -Jf.transpose() * lambda;
    const NnlsResult fit = nnls(A, target);
    MultiplierPair pair;
    pair.lambda = lambda;
    pair.e = Eigen::VectorXd::Zero(problem.nE());
    for (std::size_t k = 0; k < active.size(); ++k) pair.e[active[k]] = fit.x[static_cast<Eigen::Index>(k)];
    pair.stationarity = (Jf.transpose() * lambda + JG.transpose() * pair.e).norm();
    pair.complementarity = pair.e.size() > 0 ? pair.e.cwiseProduct(g).cwiseAbs().maxCoeff() : 0.0;
    if (pair.stationarity <= options.stationarity_tol) pairs.push_back(std::move(pair));
  }
  return pairs;
}

// ---------------------------------------------------------------------------

struct NecessaryCheck {
  Eigen::VectorXd objective_slopes;   // ∇f(z̄) d
  Eigen::VectorXd constraint_slopes;  // ∇G_act(z̄) d
  std::vector<double> curvatures;     // one per pair
  double max_curvature = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_pair;
  bool verdict = false;
};

/// Curvature dᵀ(Σ λ_j ∇²f_j + Σ e_k ∇²G_k)d for every pair. The verdict
/// holds when the largest one is >= -tol; an empty pair list fails.
inline NecessaryCheck second_order_necessary_check(const FinDimProblem& problem, const Eigen::VectorXd& zbar,
                                                   const Eigen::VectorXd& d, const std::vector<MultiplierPair>& pairs,
                                                   const FinDimOptions& options = {}) {
  if (d.size() != problem.nz()) throw FinDimError("direction has the wrong dimension");
  NecessaryCheck check;
  check.objective_slopes = problem.f_jacobian(zbar) * d;
  const std::vector<int> active = active_constraints(problem, zbar, options);
  const Eigen::MatrixXd JG = problem.G_jacobian(zbar);
  check.constraint_slopes.resize(static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k)
    check.constraint_slopes[static_cast<Eigen::Index>(k)] = JG.row(active[k]).dot(d);
  const bool objectives_ok = check.objective_slopes.maxCoeff() <= options.membership_tol;
  const bool constraints_ok = active.empty() || check.constraint_slopes.maxCoeff() <= options.membership_tol;
  if (!objectives_ok || !constraints_ok) throw DirectionNotCriticalError("direction is not critical at the reference point");

  std::vector<double> f_curv(static_cast<std::size_t>(problem.m()));
  for (int j = 0; j < problem.m(); ++j) f_curv[static_cast<std::size_t>(j)] = d.dot(problem.objective(j).hess(zbar) * d);
  std::vector<double> g_curv(static_cast<std::size_t>(problem.nE()));
  for (int k = 0; k < problem.nE(); ++k) g_curv[static_cast<std::size_t>(k)] = d.dot(problem.constraint(k).hess(zbar) * d);

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    double c = 0.0;
    for (int j = 0; j < problem.m(); ++j) c += pairs[p].lambda[j] * f_curv[static_cast<std::size_t>(j)];
    for (int k = 0; k < problem.nE(); ++k) c += pairs[p].e[k] * g_curv[static_cast<std::size_t>(k)];
    check.curvatures.push_back(c);
    if (c > check.max_curvature) {
      check.max_curvature = c;
      check.best_pair = p;
    }
  }
  check.verdict = !pairs.empty() && check.max_curvature >= -options.curvature_tol;
  return check;
}

// ---------------------------------------------------------------------------

/// Exhaustive search of the (2·steps+1)^nz grid in the sup-ball of the given
/// radius. Returns false iff a feasible grid point improves every objective
/// by more than 1e-12. Points where an expression is undefined are skipped.
inline bool weak_pareto_oracle(const FinDimProblem& problem, const Eigen::VectorXd& zbar, double radius, int steps,
                               const FinDimOptions& options = {}) {
  if (!(radius > 0.0)) throw FinDimError("oracle radius must be positive");
  if (steps < 3) throw FinDimError("oracle needs at least 3 steps per side");
  if (problem.nz() > 4) throw FinDimError("oracle is limited to nz <= 4");
  const Eigen::VectorXd fbar = problem.f(zbar);
  const int per_axis = 2 * steps + 1;
  const int nz = problem.nz();
  std::vector<int> counter(static_cast<std::size_t>(nz), 0);
  Eigen::VectorXd z(nz);
  while (true) {
    for (int a = 0; a < nz; ++a)
      z[a] = zbar[a] + radius * static_cast<double>(counter[static_cast<std::size_t>(a)] - steps) / steps;
    try {
      const Eigen::VectorXd g = problem.G(z);
      if (g.size() == 0 || g.maxCoeff() <= options.feasibility_tol) {
        const Eigen::VectorXd fz = problem.f(z);
        if (((fz - fbar).array() < -1e-12).all()) return false;
      }
    } catch (const DomainError&) {
    }
    int a = 0;
    while (a < nz && ++counter[static_cast<std::size_t>(a)] == per_axis) counter[static_cast<std::size_t>(a++)] = 0;
    if (a == nz) break;
  }
  return true;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RobinsonReport& r) {
  return {{"pass", r.pass},
          {"witness_s", r.witness_s},
          {"witness_d", std::vector<double>(r.witness_d.data(), r.witness_d.data() + r.witness_d.size())},
          {"active", r.active}};
}

inline nlohmann::json to_json(const MultiplierPair& p) {
  return {{"lambda", std::vector<double>(p.lambda.data(), p.lambda.data() + p.lambda.size())},
          {"e", std::vector<double>(p.e.data(), p.e.data() + p.e.size())},
          {"stationarity", p.stationarity},
          {"complementarity", p.complementarity}};
}

}  // namespace mocp
