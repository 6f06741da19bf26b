#pragma once

// Scalar expressions over a declared variable set: parsing, printing,
// evaluation, symbolic differentiation and algebraic simplification.
//
// Grammar (whitespace insignificant, case-sensitive):
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-')? power
//   power  := atom ('^' INT)?
//   atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//
// IDENT is either a declared variable or one of sin, cos, exp, log.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mocp {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by parse(); offset is the byte position in the source.
class ParseError : public ExprError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : ExprError(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownVariableError : public ParseError {
 public:
  UnknownVariableError(const std::string& name, std::size_t offset)
      : ParseError("unknown variable '" + name + "'", offset), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class NonIntegerExponentError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Division by zero or log of a non-positive argument.
class DomainError : public ExprError {
 public:
  using ExprError::ExprError;
};

/// Ordered list of variable names; evaluation bindings follow this order.
class VariableSet {
 public:
  VariableSet() = default;
  explicit VariableSet(std::vector<std::string> names)
      : names_(std::move(names)) {}

  /// {t, x1..xn, u1..ul}
  static VariableSet control(int n, int l) {
    std::vector<std::string> names{"t"};
    for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    for (int i = 1; i <= l; ++i) names.push_back("u" + std::to_string(i));
    return VariableSet(std::move(names));
  }

  /// {prefix1..prefixN}
  static VariableSet indexed(const std::string& prefix, int count) {
    std::vector<std::string> names;
    for (int i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
    return VariableSet(std::move(names));
  }

  std::optional<int> find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return std::nullopt;
  }

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(index); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Sin,
  Cos,
  Exp,
  Log,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

class Expr;

namespace detail {
struct Node {
  Op op = Op::Const;
  double value = 0.0;   // Const
  int index = 0;        // Var: binding slot; Pow: exponent
  std::string name;     // Var
  std::shared_ptr<const Node> lhs, rhs;
};
}  // namespace detail

/// Immutable expression tree. Copies share structure; safe to evaluate
/// concurrently.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double value) {
    auto node = std::make_shared<detail::Node>();
    node->op = Op::Const;
    node->value = value;
    return Expr(std::move(node));
  }

  static Expr variable(int index, std::string name) {
    auto node = std::make_shared<detail::Node>();
    node->op = Op::Var;
    node->index = index;
    node->name = std::move(name);
    return Expr(std::move(node));
  }

  static Expr unary(Op op, const Expr& arg) {
    auto node = std::make_shared<detail::Node>();
    node->op = op;
    node->lhs = arg.node_;
    return Expr(std::move(node));
  }

  static Expr binary(Op op, const Expr& lhs, const Expr& rhs) {
    auto node = std::make_shared<detail::Node>();
    node->op = op;
    node->lhs = lhs.node_;
    node->rhs = rhs.node_;
    return Expr(std::move(node));
  }

  static Expr power(const Expr& base, int exponent) {
    if (exponent < 0) throw ExprError("negative exponent");
    auto node = std::make_shared<detail::Node>();
    node->op = Op::Pow;
    node->index = exponent;
    node->lhs = base.node_;
    return Expr(std::move(node));
  }

  Op op() const noexcept { return node_->op; }
  double value() const noexcept { return node_->value; }
  int var_index() const noexcept { return node_->index; }
  int exponent() const noexcept { return node_->index; }
  const std::string& var_name() const noexcept { return node_->name; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  bool is_constant() const noexcept { return node_->op == Op::Const; }
  bool is_constant(double v) const noexcept {
    return node_->op == Op::Const && node_->value == v;
  }

  /// Structural equality.
  friend bool operator==(const Expr& a, const Expr& b) {
    return equal_nodes(a.node_.get(), b.node_.get());
  }

 private:
  explicit Expr(std::shared_ptr<const detail::Node> node)
      : node_(std::move(node)) {}

  static bool equal_nodes(const detail::Node* a, const detail::Node* b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->op != b->op) return false;
    switch (a->op) {
      case Op::Const:
        return a->value == b->value;
      case Op::Var:
        return a->index == b->index && a->name == b->name;
      case Op::Pow:
        return a->index == b->index && equal_nodes(a->lhs.get(), b->lhs.get());
      default:
        return equal_nodes(a->lhs.get(), b->lhs.get()) &&
               equal_nodes(a->rhs.get(), b->rhs.get());
    }
  }

  std::shared_ptr<const detail::Node> node_;
};

inline bool is_unary(Op op) {
  return op == Op::Neg || op == Op::Sin || op == Op::Cos || op == Op::Exp ||
         op == Op::Log;
}

inline bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin:
      return "sin";
    case Op::Cos:
      return "cos";
    case Op::Exp:
      return "exp";
    case Op::Log:
      return "log";
    default:
      return "";
  }
}

inline double int_pow(double base, int exponent) {
  double result = 1.0;
  double factor = base;
  for (unsigned e = static_cast<unsigned>(exponent); e != 0; e >>= 1) {
    if (e & 1u) result *= factor;
    factor *= factor;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Precedence levels used by the printer; a child printed in a context that
// requires a higher level gets parentheses.
constexpr int kLevelSum = 1;
constexpr int kLevelProduct = 2;
constexpr int kLevelFactor = 3;
constexpr int kLevelPower = 4;
constexpr int kLevelAtom = 5;

inline int level_of(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return kLevelSum;
    case Op::Mul:
    case Op::Div:
      return kLevelProduct;
    case Op::Neg:
      return kLevelFactor;
    case Op::Pow:
      return kLevelPower;
    default:
      return kLevelAtom;
  }
}

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (v < 0) return "(" + s + ")";
  return s;
}

inline void print_to(std::string& out, const Expr& e);

inline void print_child(std::string& out, const Expr& child, int required) {
  if (level_of(child) < required) {
    out += '(';
    print_to(out, child);
    out += ')';
  } else {
    print_to(out, child);
  }
}

inline void print_to(std::string& out, const Expr& e) {
  switch (e.op()) {
    case Op::Const:
      out += format_number(e.value());
      return;
    case Op::Var:
      out += e.var_name();
      return;
    case Op::Neg:
      out += '-';
      print_child(out, e.lhs(), kLevelPower);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
      out += function_name(e.op());
      out += '(';
      print_to(out, e.lhs());
      out += ')';
      return;
    case Op::Add:
    case Op::Sub:
      print_child(out, e.lhs(), kLevelSum);
      out += e.op() == Op::Add ? " + " : " - ";
      print_child(out, e.rhs(), kLevelProduct);
      return;
    case Op::Mul:
    case Op::Div:
      print_child(out, e.lhs(), kLevelProduct);
      out += e.op() == Op::Mul ? '*' : '/';
      print_child(out, e.rhs(), kLevelFactor);
      return;
    case Op::Pow:
      print_child(out, e.lhs(), kLevelAtom);
      out += '^';
      out += std::to_string(e.exponent());
      return;
  }
}

}  // namespace detail

/// Renders an expression in the input grammar with minimal parentheses.
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_to(out, e);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const VariableSet& vars)
      : src_(src), vars_(vars) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, pos_);
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r'))
      ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }

  Expr expr() {
    Expr lhs = term();
    while (true) {
      if (peek('+')) {
        ++pos_;
        lhs = Expr::binary(Op::Add, lhs, term());
      } else if (peek('-')) {
        ++pos_;
        lhs = Expr::binary(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    while (true) {
      if (peek('*')) {
        ++pos_;
        lhs = Expr::binary(Op::Mul, lhs, factor());
      } else if (peek('/')) {
        ++pos_;
        lhs = Expr::binary(Op::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    if (peek('-')) {
      ++pos_;
      return Expr::unary(Op::Neg, power());
    }
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (!peek('^')) return base;
    ++pos_;
    skip_ws();
    const std::size_t start = pos_;
    std::size_t end = start;
    while (end < src_.size() && is_digit(src_[end])) ++end;
    const bool more_number =
        end < src_.size() &&
        (src_[end] == '.' || src_[end] == 'e' || src_[end] == 'E');
    if (end == start || more_number) {
      throw NonIntegerExponentError(
          "exponent must be a non-negative integer literal", start);
    }
    int exponent = 0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + end, exponent);
    if (ec != std::errc()) {
      throw NonIntegerExponentError("exponent out of range", start);
    }
    pos_ = end;
    return Expr::power(base, exponent);
  }

  Expr atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      if (!peek(')')) fail("expected ')'");
      ++pos_;
      return inner;
    }
    if (is_digit(c) || c == '.') return number();
    if (is_alpha(c)) return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < src_.size() && is_digit(src_[p])) ++p;
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      while (p < src_.size() && is_digit(src_[p])) ++p;
    }
    if (p == start + 1 && src_[start] == '.') fail("malformed number");
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q < src_.size() && is_digit(src_[q])) {
        while (q < src_.size() && is_digit(src_[q])) ++q;
        p = q;
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + p, value);
    if (ec != std::errc() || ptr != src_.data() + p) fail("malformed number");
    pos_ = p;
    return Expr::constant(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (is_alpha(src_[pos_]) || is_digit(src_[pos_])))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    Op fn = Op::Const;
    if (name == "sin") fn = Op::Sin;
    else if (name == "cos") fn = Op::Cos;
    else if (name == "exp") fn = Op::Exp;
    else if (name == "log") fn = Op::Log;
    if (fn != Op::Const) {
      if (!peek('(')) fail("expected '(' after " + name);
      ++pos_;
      Expr arg = expr();
      if (!peek(')')) fail("expected ')'");
      ++pos_;
      return Expr::unary(fn, arg);
    }
    auto index = vars_.find(name);
    if (!index) throw UnknownVariableError(name, start);
    return Expr::variable(*index, name);
  }

  std::string_view src_;
  const VariableSet& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view source, const VariableSet& vars) {
  return detail::Parser(source, vars).parse();
}

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluates with binding[k] bound to variable index k.
inline double evaluate(const Expr& e, std::span<const double> binding) {
  switch (e.op()) {
    case Op::Const:
      return e.value();
    case Op::Var:
      if (e.var_index() < 0 || static_cast<std::size_t>(e.var_index()) >= binding.size())
        throw ExprError("binding has no slot for variable '" + e.var_name() + "'");
      return binding[static_cast<std::size_t>(e.var_index())];
    case Op::Neg:
      return -evaluate(e.lhs(), binding);
    case Op::Sin:
      return std::sin(evaluate(e.lhs(), binding));
    case Op::Cos:
      return std::cos(evaluate(e.lhs(), binding));
    case Op::Exp:
      return std::exp(evaluate(e.lhs(), binding));
    case Op::Log: {
      const double a = evaluate(e.lhs(), binding);
      if (!(a > 0.0)) throw DomainError("log of non-positive value in '" + to_string(e) + "'");
      return std::log(a);
    }
    case Op::Add:
      return evaluate(e.lhs(), binding) + evaluate(e.rhs(), binding);
    case Op::Sub:
      return evaluate(e.lhs(), binding) - evaluate(e.rhs(), binding);
    case Op::Mul:
      return evaluate(e.lhs(), binding) * evaluate(e.rhs(), binding);
    case Op::Div: {
      const double num = evaluate(e.lhs(), binding);
      const double den = evaluate(e.rhs(), binding);
      if (den == 0.0) throw DomainError("division by zero in '" + to_string(e) + "'");
      return num / den;
    }
    case Op::Pow:
      return int_pow(evaluate(e.lhs(), binding), e.exponent());
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Simplifying constructors. Each applies local rewrite rules; the tree they
// return evaluates identically wherever the unsimplified tree is defined.

namespace detail {
inline std::optional<double> fold(Op op, double a, double b = 0.0) {
  double r = 0.0;
  switch (op) {
    case Op::Neg: r = -a; break;
    case Op::Sin: r = std::sin(a); break;
    case Op::Cos: r = std::cos(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Log:
      if (!(a > 0.0)) return std::nullopt;
      r = std::log(a);
      break;
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div:
      if (b == 0.0) return std::nullopt;
      r = a / b;
      break;
    default:
      return std::nullopt;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}
}  // namespace detail

inline Expr make_neg(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.value());
  if (a.op() == Op::Neg) return a.lhs();
  return Expr::unary(Op::Neg, a);
}

inline Expr make_unary(Op op, const Expr& a) {
  if (op == Op::Neg) return make_neg(a);
  if (a.is_constant())
    if (auto v = detail::fold(op, a.value())) return Expr::constant(*v);
  return Expr::unary(op, a);
}

inline Expr make_add(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = detail::fold(Op::Add, a.value(), b.value())) return Expr::constant(*v);
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::binary(Op::Add, a, b);
}

inline Expr make_sub(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = detail::fold(Op::Sub, a.value(), b.value())) return Expr::constant(*v);
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return make_neg(b);
  return Expr::binary(Op::Sub, a, b);
}

inline Expr make_mul(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = detail::fold(Op::Mul, a.value(), b.value())) return Expr::constant(*v);
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return make_neg(b);
  if (b.is_constant(-1.0)) return make_neg(a);
  return Expr::binary(Op::Mul, a, b);
}

inline Expr make_div(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = detail::fold(Op::Div, a.value(), b.value())) return Expr::constant(*v);
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(Op::Div, a, b);
}

inline Expr make_pow(const Expr& a, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return a;
  if (a.is_constant()) {
    const double v = int_pow(a.value(), exponent);
    if (std::isfinite(v)) return Expr::constant(v);
  }
  return Expr::power(a, exponent);
}

inline Expr make_binary(Op op, const Expr& a, const Expr& b) {
  switch (op) {
    case Op::Add: return make_add(a, b);
    case Op::Sub: return make_sub(a, b);
    case Op::Mul: return make_mul(a, b);
    case Op::Div: return make_div(a, b);
    default: throw ExprError("not a binary operator");
  }
}

/// Bottom-up rewrite: x+0, x*1, x*0, constant folding, pow(x,0), pow(x,1),
/// double negation.
inline Expr simplify(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
      return e;
    case Op::Pow:
      return make_pow(simplify(e.lhs()), e.exponent());
    default:
      if (is_unary(e.op())) return make_unary(e.op(), simplify(e.lhs()));
      return make_binary(e.op(), simplify(e.lhs()), simplify(e.rhs()));
  }
}

/// Exact partial derivative with respect to the variable in binding slot
/// `var`. The result is built with the simplifying constructors.
inline Expr differentiate(const Expr& e, int var) {
  switch (e.op()) {
    case Op::Const:
      return Expr::constant(0.0);
    case Op::Var:
      return Expr::constant(e.var_index() == var ? 1.0 : 0.0);
    case Op::Neg:
      return make_neg(differentiate(e.lhs(), var));
    case Op::Sin:
      return make_mul(make_unary(Op::Cos, e.lhs()), differentiate(e.lhs(), var));
    case Op::Cos:
      return make_neg(make_mul(make_unary(Op::Sin, e.lhs()), differentiate(e.lhs(), var)));
    case Op::Exp:
      return make_mul(e, differentiate(e.lhs(), var));
    case Op::Log:
      return make_div(differentiate(e.lhs(), var), e.lhs());
    case Op::Add:
      return make_add(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::Sub:
      return make_sub(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::Mul: {
      const Expr& f = e.lhs();
      const Expr& g = e.rhs();
      return make_add(make_mul(differentiate(f, var), g),
                      make_mul(f, differentiate(g, var)));
    }
    case Op::Div: {
      const Expr f = e.lhs();
      const Expr g = e.rhs();
      return make_div(make_sub(make_mul(differentiate(f, var), g),
                               make_mul(f, differentiate(g, var))),
                      make_pow(g, 2));
    }
    case Op::Pow: {
      const int k = e.exponent();
      if (k == 0) return Expr::constant(0.0);
      return make_mul(make_mul(Expr::constant(static_cast<double>(k)),
                               make_pow(e.lhs(), k - 1)),
                      differentiate(e.lhs(), var));
    }
  }
  return Expr::constant(0.0);
}

/// Convenience overload resolving the variable by name.
inline Expr differentiate(const Expr& e, const VariableSet& vars,
                          std::string_view name) {
  auto index = vars.find(name);
  if (!index) throw ExprError("undeclared variable '" + std::string(name) + "'");
  return differentiate(e, *index);
}

inline int depth(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
      return 1;
    case Op::Pow:
      return 1 + depth(e.lhs());
    default:
      if (is_unary(e.op())) return 1 + depth(e.lhs());
      return 1 + std::max(depth(e.lhs()), depth(e.rhs()));
  }
}

}  // namespace mocp
