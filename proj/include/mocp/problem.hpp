#pragma once

// Multi-objective optimal control problem instances:
//
//   Min  (∫ L_1 dt, ..., ∫ L_m dt)
//   s.t. x(t) = x0 + ∫_0^t φ(s, x, u) ds,   g(t, x, u) <= 0,   t in [0, 1].

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mocp/expr.hpp"
#include "mocp/grid.hpp"

namespace mocp {

class ProblemError : public std::runtime_error {
 public:
  enum class Kind { Schema, Expression, Dimension, UnknownBuiltin };

  ProblemError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A scalar function of (t, x, u) together with its cached gradient and
/// Hessian trees with respect to the stacked vector (x, u).
struct ScalarField {
  Expr value;
  std::vector<Expr> gradient;  // size n + l
  std::vector<Expr> hessian;   // (n + l)^2, row-major, entry (a,b) = d_b d_a

  static ScalarField build(const Expr& f, int n, int l) {
    const int k = n + l;
    ScalarField field;
    field.value = f;
    field.gradient.reserve(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) field.gradient.push_back(simplify(differentiate(f, a + 1)));
    field.hessian.reserve(static_cast<std::size_t>(k * k));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        field.hessian.push_back(simplify(differentiate(field.gradient[static_cast<std::size_t>(a)], b + 1)));
    return field;
  }

  int dim() const { return static_cast<int>(gradient.size()); }

  void eval_gradient(std::span<const double> binding,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
    for (int a = 0; a < dim(); ++a) out[a] = evaluate(gradient[static_cast<std::size_t>(a)], binding);
  }

  void eval_hessian(std::span<const double> binding, Eigen::Ref<Eigen::MatrixXd> out) const {
    const int k = dim();
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        out(a, b) = evaluate(hessian[static_cast<std::size_t>(a * k + b)], binding);
  }
};

/// Immutable problem instance with all derivative trees precomputed.
class Problem {
 public:
  Problem(std::string name, int n, int l, int m, Eigen::VectorXd x0,
          std::vector<std::string> cost_sources, std::vector<std::string> dynamics_sources,
          std::string constraint_source)
      : name_(std::move(name)),
        n_(n),
        l_(l),
        m_(m),
        x0_(std::move(x0)),
        cost_sources_(std::move(cost_sources)),
        dynamics_sources_(std::move(dynamics_sources)),
        constraint_source_(std::move(constraint_source)),
        vars_(VariableSet::control(n, l)) {
    using K = ProblemError::Kind;
    if (n_ < 1 || l_ < 1 || m_ < 1) throw ProblemError(K::Dimension, "n, l and m must be positive");
    if (x0_.size() != n_)
      throw ProblemError(K::Dimension, "x0 has length " + std::to_string(x0_.size()) + ", expected n = " + std::to_string(n_));
    if (static_cast<int>(cost_sources_.size()) != m_)
      throw ProblemError(K::Dimension, "L has " + std::to_string(cost_sources_.size()) + " entries, expected m = " + std::to_string(m_));
    if (static_cast<int>(dynamics_sources_.size()) != n_)
      throw ProblemError(K::Dimension, "phi has " + std::to_string(dynamics_sources_.size()) + " entries, expected n = " + std::to_string(n_));

    for (int j = 0; j < m_; ++j)
      costs_.push_back(ScalarField::build(parse_field(cost_sources_[static_cast<std::size_t>(j)], "L[" + std::to_string(j) + "]"), n_, l_));
    for (int i = 0; i < n_; ++i)
      dynamics_.push_back(ScalarField::build(parse_field(dynamics_sources_[static_cast<std::size_t>(i)], "phi[" + std::to_string(i) + "]"), n_, l_));
    constraint_ = ScalarField::build(parse_field(constraint_source_, "g"), n_, l_);
  }

  const std::string& name() const noexcept { return name_; }
  int n() const noexcept { return n_; }
  int l() const noexcept { return l_; }
  int m() const noexcept { return m_; }
  /// Dimension of the stacked (x, u) vector.
  int nz() const noexcept { return n_ + l_; }
  const Eigen::VectorXd& x0() const noexcept { return x0_; }
  const VariableSet& variables() const noexcept { return vars_; }

  const ScalarField& cost(int j) const { return costs_.at(static_cast<std::size_t>(j)); }
  const ScalarField& dynamics(int i) const { return dynamics_.at(static_cast<std::size_t>(i)); }
  const ScalarField& constraint() const noexcept { return constraint_; }

  const std::vector<std::string>& cost_sources() const noexcept { return cost_sources_; }
  const std::vector<std::string>& dynamics_sources() const noexcept { return dynamics_sources_; }
  const std::string& constraint_source() const noexcept { return constraint_source_; }

  /// Fills `binding` = (t, x, u) in variable-slot order.
  template <typename XRow, typename URow>
  void bind(double t, const XRow& x, const URow& u, std::vector<double>& binding) const {
    binding.resize(static_cast<std::size_t>(1 + n_ + l_));
    binding[0] = t;
    for (int i = 0; i < n_; ++i) binding[static_cast<std::size_t>(1 + i)] = x[i];
    for (int i = 0; i < l_; ++i) binding[static_cast<std::size_t>(1 + n_ + i)] = u[i];
  }

  /// φ(t, x, u) for a prepared binding.
  void eval_dynamics(std::span<const double> binding, Eigen::Ref<Eigen::VectorXd> out) const {
    for (int i = 0; i < n_; ++i) out[i] = evaluate(dynamics_[static_cast<std::size_t>(i)].value, binding);
  }

 private:
  Expr parse_field(const std::string& source, const std::string& path) const {
    try {
      return parse(source, vars_);
    } catch (const ParseError& e) {
      throw ProblemError(ProblemError::Kind::Expression, path + ": " + e.what());
    }
  }

  std::string name_;
  int n_, l_, m_;
  Eigen::VectorXd x0_;
  std::vector<std::string> cost_sources_;
  std::vector<std::string> dynamics_sources_;
  std::string constraint_source_;
  VariableSet vars_;
  std::vector<ScalarField> costs_;
  std::vector<ScalarField> dynamics_;
  ScalarField constraint_;
};

// ---------------------------------------------------------------------------
// Problem documents

inline nlohmann::json to_json(const Problem& p) {
  nlohmann::json x0 = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.x0().size(); ++i) x0.push_back(p.x0()[i]);
  nlohmann::json j = {{"n", p.n()},
                      {"l", p.l()},
                      {"m", p.m()},
                      {"x0", x0},
                      {"L", p.cost_sources()},
                      {"phi", p.dynamics_sources()},
                      {"g", p.constraint_source()}};
  if (!p.name().empty()) j["name"] = p.name();
  return j;
}

namespace detail {
inline int positive_int_field(const nlohmann::json& j, const char* key) {
  using K = ProblemError::Kind;
  if (!j.contains(key)) throw ProblemError(K::Schema, std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ProblemError(K::Schema, std::string("'") + key + "' must be a positive integer");
  return v.get<int>();
}

inline std::vector<std::string> string_list_field(const nlohmann::json& j, const char* key) {
  using K = ProblemError::Kind;
  if (!j.contains(key)) throw ProblemError(K::Schema, std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_array()) throw ProblemError(K::Schema, std::string("'") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      throw ProblemError(K::Schema, std::string(key) + "[" + std::to_string(i) + "] must be a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}
}  // namespace detail

/// Parses a problem document; unknown fields are rejected.
inline Problem load_problem(const nlohmann::json& j) {
  using K = ProblemError::Kind;
  if (!j.is_object()) throw ProblemError(K::Schema, "problem document must be a JSON object");
  static const char* kFields[] = {"n", "l", "m", "x0", "L", "phi", "g", "name"};
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* f : kFields) known = known || key == f;
    if (!known) throw ProblemError(K::Schema, "unknown field '" + key + "'");
  }
  const int n = detail::positive_int_field(j, "n");
  const int l = detail::positive_int_field(j, "l");
  const int m = detail::positive_int_field(j, "m");
  if (!j.contains("x0") || !j.at("x0").is_array()) throw ProblemError(K::Schema, "'x0' must be an array of numbers");
  const auto& x0j = j.at("x0");
  Eigen::VectorXd x0(static_cast<Eigen::Index>(x0j.size()));
  for (std::size_t i = 0; i < x0j.size(); ++i) {
    if (!x0j[i].is_number()) throw ProblemError(K::Schema, "x0[" + std::to_string(i) + "] must be a number");
    x0[static_cast<Eigen::Index>(i)] = x0j[i].get<double>();
  }
  auto costs = detail::string_list_field(j, "L");
  auto dynamics = detail::string_list_field(j, "phi");
  if (!j.contains("g") || !j.at("g").is_string()) throw ProblemError(K::Schema, "'g' must be a string");
  std::string name;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ProblemError(K::Schema, "'name' must be a string");
    name = j.at("name").get<std::string>();
  }
  return Problem(std::move(name), n, l, m, std::move(x0), std::move(costs), std::move(dynamics),
                 j.at("g").get<std::string>());
}

inline Problem load_problem_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProblemError(ProblemError::Kind::Schema, std::string("malformed JSON: ") + e.what());
  }
  return load_problem(j);
}

/// 64-bit FNV-1a of the canonical document, as 16 hex digits.
inline std::string problem_hash(const Problem& p) {
  const std::string canonical = to_json(p).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* kHex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Registry

inline std::vector<std::string> builtin_names() { return {"example_6_1", "example_6_2"}; }

inline Problem builtin(const std::string& name) {
  const std::vector<std::string> phi{"u1", "u2"};
  const std::string g = "x1 + x2 - u1 - u2";
  if (name == "example_6_1")
    return Problem(name, 2, 2, 2, Eigen::VectorXd::Zero(2), {"x1^2 + u1^2", "x2^2 + u2^2"}, phi, g);
  if (name == "example_6_2")
    return Problem(name, 2, 2, 2, Eigen::VectorXd::Zero(2), {"x1^2 - u1^2", "x2^2 - u2^2"}, phi, g);
  std::string available;
  for (const auto& n : builtin_names()) available += (available.empty() ? "" : ", ") + n;
  throw ProblemError(ProblemError::Kind::UnknownBuiltin,
                     "unknown builtin '" + name + "'; available: " + available);
}

// ---------------------------------------------------------------------------
// Uniform control regularity of the mixed constraint

struct H2Report {
  int i0 = 0;               // selected control index (0-based)
  double alpha_hat = 0.0;   // min over nodes of |g_{u_i0}|
  double alpha = 0.0;
  bool pass = false;
  Eigen::VectorXd node_values;  // |g_{u_i0}[t_i]|
};

/// Picks the control component whose |∂g/∂u_i| has the largest minimum over
/// the grid (lowest index on ties) and compares that minimum against alpha.
inline H2Report validate_h2(const Problem& problem, const Trajectory& traj, double alpha) {
  require_shape(traj, problem.n(), problem.l());
  const int nodes = traj.grid.nodes();
  Eigen::MatrixXd abs_gu(nodes, problem.l());
  std::vector<double> binding;
  Eigen::RowVectorXd grad(problem.nz());
  for (int i = 0; i < nodes; ++i) {
    problem.bind(traj.grid.node(i), traj.x.row(i), traj.u.row(i), binding);
    problem.constraint().eval_gradient(binding, grad);
    abs_gu.row(i) = grad.tail(problem.l()).cwiseAbs();
  }
  H2Report report;
  report.alpha = alpha;
  report.alpha_hat = -1.0;
  for (int k = 0; k < problem.l(); ++k) {
    const double lowest = abs_gu.col(k).minCoeff();
    if (lowest > report.alpha_hat) {
      report.alpha_hat = lowest;
      report.i0 = k;
    }
  }
  report.node_values = abs_gu.col(report.i0);
  report.pass = report.alpha_hat >= alpha;
  return report;
}

}  // namespace mocp
