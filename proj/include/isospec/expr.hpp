#pragma once

// Small expression language for the scalar functions that parametrize the
// intertwining constructions: f(eta), h(kappa), potentials entered on the
// command line.  Supports exact symbolic differentiation so that identities
// like V' = f^2 +- c(1+eta^2) f' can be formed without finite differences.
//
// Semantics: IEEE doubles; domain violations (log of a non-positive value,
// division by zero, ...) raise eval_error instead of returning NaN.
// Trees are immutable; copies share structure and are cheap.

#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace isospec {

struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, std::size_t pos);
  std::size_t position;  // byte offset into the source text
};

struct eval_error : std::runtime_error {
  explicit eval_error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class UnaryOp { neg, sin, cos, tan, atan, tanh, sinh, cosh, exp, ln, sqrt, abs };
enum class BinaryOp { add, sub, mul, div, pow };

class CompiledExpr;

class Expr {
 public:
  Expr();  // the constant 0

  static Expr constant(double v);
  static Expr variable(const std::string& name);

  // Grammar: +, -, *, /, ^ (right associative, binds tighter than unary
  // minus), function application name(arg), parentheses, decimal literals.
  // Only names in allowed_vars may appear as variables; sech(x) is accepted
  // as sugar for 1/cosh(x).
  static Expr parse(std::string_view text, const std::vector<std::string>& allowed_vars);

  double eval(const std::map<std::string, double>& bindings) const;

  // Exact derivative; literal subtrees are constant-folded but no other
  // simplification is applied, so results compare by evaluation.
  Expr derivative(const std::string& var) const;

  // Replaces every occurrence of var by the given expression; subtrees that
  // become literal are constant-folded.
  Expr substitute(const std::string& var, const Expr& replacement) const;

  std::string str() const;
  std::set<std::string> variables() const;

  bool is_constant() const;
  double constant_value() const;  // requires is_constant()

  // Fixes a variable ordering for fast repeated evaluation on grids.
  CompiledExpr compile(const std::vector<std::string>& var_order) const;

  friend Expr operator+(const Expr&, const Expr&);
  friend Expr operator-(const Expr&, const Expr&);
  friend Expr operator*(const Expr&, const Expr&);
  friend Expr operator/(const Expr&, const Expr&);
  friend Expr operator-(const Expr&);
  friend Expr pow(const Expr&, const Expr&);
  friend Expr apply(UnaryOp, const Expr&);

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  explicit Expr(NodePtr n) : root_(std::move(n)) {}
  const Node& root() const { return *root_; }

 private:
  NodePtr root_;
};

Expr sin(const Expr&);
Expr cos(const Expr&);
Expr tan(const Expr&);
Expr atan(const Expr&);
Expr tanh(const Expr&);
Expr sinh(const Expr&);
Expr cosh(const Expr&);
Expr exp(const Expr&);
Expr ln(const Expr&);
Expr sqrt(const Expr&);
Expr abs(const Expr&);

// Postfix program over a value stack; variable slots follow the ordering
// given to Expr::compile.  Evaluation applies the same domain checks as
// Expr::eval.
class CompiledExpr {
 public:
  double operator()(std::span<const double> values) const;
  std::size_t arity() const { return arity_; }

  enum class OpCode : int { push_const, push_var, unary, binary };
  struct Op {
    OpCode code;
    double value = 0.0;
    int slot = 0;
    UnaryOp uop = UnaryOp::neg;
    BinaryOp bop = BinaryOp::add;
  };

 private:
  friend class Expr;
  std::vector<Op> ops_;
  std::size_t arity_ = 0;
};

}  // namespace isospec
