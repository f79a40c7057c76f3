#include "isospec/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>

namespace isospec {

struct Expr::Node {
  enum class Kind { constant, variable, unary, binary } kind;
  double value = 0.0;      // constant
  std::string name;        // variable
  UnaryOp uop = UnaryOp::neg;
  BinaryOp bop = BinaryOp::add;
  NodePtr lhs, rhs;        // unary uses lhs only
  long pos = -1;           // source offset, -1 for synthetic nodes
};

namespace {

using Node = Expr::Node;
using NodePtr = Expr::NodePtr;
using Kind = Node::Kind;

std::string unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::neg: return "-";
    case UnaryOp::sin: return "sin";
    case UnaryOp::cos: return "cos";
    case UnaryOp::tan: return "tan";
    case UnaryOp::atan: return "atan";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::sinh: return "sinh";
    case UnaryOp::cosh: return "cosh";
    case UnaryOp::exp: return "exp";
    case UnaryOp::ln: return "ln";
    case UnaryOp::sqrt: return "sqrt";
    case UnaryOp::abs: return "abs";
  }
  return "?";
}

char binary_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return '+';
    case BinaryOp::sub: return '-';
    case BinaryOp::mul: return '*';
    case BinaryOp::div: return '/';
    case BinaryOp::pow: return '^';
  }
  return '?';
}

[[noreturn]] void domain_fail(const std::string& what, long pos) {
  std::string msg = "domain error: " + what;
  if (pos >= 0) msg += " (source position " + std::to_string(pos) + ")";
  throw eval_error(msg);
}

double apply_unary(UnaryOp op, double x, long pos) {
  double r = 0.0;
  switch (op) {
    case UnaryOp::neg: r = -x; break;
    case UnaryOp::sin: r = std::sin(x); break;
    case UnaryOp::cos: r = std::cos(x); break;
    case UnaryOp::tan: r = std::tan(x); break;
    case UnaryOp::atan: r = std::atan(x); break;
    case UnaryOp::tanh: r = std::tanh(x); break;
    case UnaryOp::sinh: r = std::sinh(x); break;
    case UnaryOp::cosh: r = std::cosh(x); break;
    case UnaryOp::exp: r = std::exp(x); break;
    case UnaryOp::ln:
      if (!(x > 0.0)) domain_fail("ln of non-positive value", pos);
      r = std::log(x);
      break;
    case UnaryOp::sqrt:
      if (x < 0.0) domain_fail("sqrt of negative value", pos);
      r = std::sqrt(x);
      break;
    case UnaryOp::abs: r = std::fabs(x); break;
  }
  if (!std::isfinite(r)) domain_fail(unary_name(op) + " overflowed", pos);
  return r;
}

double apply_binary(BinaryOp op, double a, double b, long pos) {
  double r = 0.0;
  switch (op) {
    case BinaryOp::add: r = a + b; break;
    case BinaryOp::sub: r = a - b; break;
    case BinaryOp::mul: r = a * b; break;
    case BinaryOp::div:
      if (b == 0.0) domain_fail("division by zero", pos);
      r = a / b;
      break;
    case BinaryOp::pow:
      if (a == 0.0 && b < 0.0) domain_fail("zero raised to a negative power", pos);
      if (a < 0.0 && b != std::nearbyint(b)) domain_fail("negative base with non-integer exponent", pos);
      r = std::pow(a, b);
      break;
  }
  if (!std::isfinite(r)) {
    domain_fail(std::string("operator '") + binary_symbol(op) + "' overflowed", pos);
  }
  return r;
}

NodePtr make_constant(double v, long pos = -1) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::constant;
  n->value = v;
  n->pos = pos;
  return n;
}

NodePtr make_variable(const std::string& name, long pos = -1) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->name = name;
  n->pos = pos;
  return n;
}

// Folds when the child is a literal and the result is representable;
// a folding failure (domain) is deferred to evaluation time.
NodePtr make_unary(UnaryOp op, NodePtr a, long pos = -1) {
  if (a->kind == Kind::constant) {
    try {
      return make_constant(apply_unary(op, a->value, pos), pos);
    } catch (const eval_error&) {
    }
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::unary;
  n->uop = op;
  n->lhs = std::move(a);
  n->pos = pos;
  return n;
}

NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b, long pos = -1) {
  if (a->kind == Kind::constant && b->kind == Kind::constant) {
    try {
      return make_constant(apply_binary(op, a->value, b->value, pos), pos);
    } catch (const eval_error&) {
    }
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::binary;
  n->bop = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  n->pos = pos;
  return n;
}

double eval_node(const Node& n, const std::map<std::string, double>& env) {
  switch (n.kind) {
    case Kind::constant: return n.value;
    case Kind::variable: {
      auto it = env.find(n.name);
      if (it == env.end()) throw eval_error("unbound variable '" + n.name + "'");
      return it->second;
    }
    case Kind::unary: return apply_unary(n.uop, eval_node(*n.lhs, env), n.pos);
    case Kind::binary:
      return apply_binary(n.bop, eval_node(*n.lhs, env), eval_node(*n.rhs, env), n.pos);
  }
  throw eval_error("corrupt expression node");
}

// d/dvar, recursive over the tree.  Power splits into the three usual cases
// so that integer powers differentiate without introducing ln.
NodePtr diff_node(const NodePtr& n, const std::string& var) {
  switch (n->kind) {
    case Kind::constant: return make_constant(0.0);
    case Kind::variable: return make_constant(n->name == var ? 1.0 : 0.0);
    case Kind::unary: {
      NodePtr u = n->lhs;
      NodePtr du = diff_node(u, var);
      NodePtr inner;  // d(op)/du
      switch (n->uop) {
        case UnaryOp::neg: return make_unary(UnaryOp::neg, du);
        case UnaryOp::sin: inner = make_unary(UnaryOp::cos, u); break;
        case UnaryOp::cos: inner = make_unary(UnaryOp::neg, make_unary(UnaryOp::sin, u)); break;
        case UnaryOp::tan:
          inner = make_binary(BinaryOp::div, make_constant(1.0),
                              make_binary(BinaryOp::pow, make_unary(UnaryOp::cos, u), make_constant(2.0)));
          break;
        case UnaryOp::atan:
          inner = make_binary(BinaryOp::div, make_constant(1.0),
                              make_binary(BinaryOp::add, make_constant(1.0),
                                          make_binary(BinaryOp::pow, u, make_constant(2.0))));
          break;
        case UnaryOp::tanh:
          inner = make_binary(BinaryOp::div, make_constant(1.0),
                              make_binary(BinaryOp::pow, make_unary(UnaryOp::cosh, u), make_constant(2.0)));
          break;
        case UnaryOp::sinh: inner = make_unary(UnaryOp::cosh, u); break;
        case UnaryOp::cosh: inner = make_unary(UnaryOp::sinh, u); break;
        case UnaryOp::exp: inner = make_unary(UnaryOp::exp, u); break;
        case UnaryOp::ln: inner = make_binary(BinaryOp::div, make_constant(1.0), u); break;
        case UnaryOp::sqrt:
          inner = make_binary(BinaryOp::div, make_constant(1.0),
                              make_binary(BinaryOp::mul, make_constant(2.0), make_unary(UnaryOp::sqrt, u)));
          break;
        case UnaryOp::abs:
          // u/|u|; not differentiable at u = 0, where evaluation fails.
          inner = make_binary(BinaryOp::div, u, make_unary(UnaryOp::abs, u));
          break;
      }
      return make_binary(BinaryOp::mul, inner, du);
    }
    case Kind::binary: {
      NodePtr u = n->lhs, v = n->rhs;
      NodePtr du = diff_node(u, var), dv = diff_node(v, var);
      switch (n->bop) {
        case BinaryOp::add: return make_binary(BinaryOp::add, du, dv);
        case BinaryOp::sub: return make_binary(BinaryOp::sub, du, dv);
        case BinaryOp::mul:
          return make_binary(BinaryOp::add, make_binary(BinaryOp::mul, du, v),
                             make_binary(BinaryOp::mul, u, dv));
        case BinaryOp::div:
          return make_binary(
              BinaryOp::div,
              make_binary(BinaryOp::sub, make_binary(BinaryOp::mul, du, v),
                          make_binary(BinaryOp::mul, u, dv)),
              make_binary(BinaryOp::pow, v, make_constant(2.0)));
        case BinaryOp::pow: {
          if (v->kind == Kind::constant) {
            // d(u^c) = c u^(c-1) u'
            NodePtr p = make_binary(BinaryOp::pow, u, make_constant(v->value - 1.0));
            return make_binary(BinaryOp::mul, make_binary(BinaryOp::mul, make_constant(v->value), p), du);
          }
          if (u->kind == Kind::constant) {
            // d(c^v) = c^v ln(c) v'
            NodePtr p = make_binary(BinaryOp::pow, u, v);
            return make_binary(BinaryOp::mul, make_binary(BinaryOp::mul, p, make_unary(UnaryOp::ln, u)), dv);
          }
          // d(u^v) = u^v (v' ln u + v u'/u)
          NodePtr p = make_binary(BinaryOp::pow, u, v);
          NodePtr t1 = make_binary(BinaryOp::mul, dv, make_unary(UnaryOp::ln, u));
          NodePtr t2 = make_binary(BinaryOp::mul, v, make_binary(BinaryOp::div, du, u));
          return make_binary(BinaryOp::mul, p, make_binary(BinaryOp::add, t1, t2));
        }
      }
      break;
    }
  }
  throw eval_error("corrupt expression node");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::constant: {
      if (n.value < 0.0 || (n.value == 0.0 && std::signbit(n.value))) {
        out += '(';
        out += format_double(n.value);
        out += ')';
      } else {
        out += format_double(n.value);
      }
      return;
    }
    case Kind::variable: out += n.name; return;
    case Kind::unary:
      if (n.uop == UnaryOp::neg) {
        out += "(-";
        print_node(*n.lhs, out);
        out += ')';
      } else {
        out += unary_name(n.uop);
        out += '(';
        print_node(*n.lhs, out);
        out += ')';
      }
      return;
    case Kind::binary:
      out += '(';
      print_node(*n.lhs, out);
      out += ' ';
      out += binary_symbol(n.bop);
      out += ' ';
      print_node(*n.rhs, out);
      out += ')';
      return;
  }
}

void collect_variables(const Node& n, std::set<std::string>& out) {
  switch (n.kind) {
    case Kind::constant: return;
    case Kind::variable: out.insert(n.name); return;
    case Kind::unary: collect_variables(*n.lhs, out); return;
    case Kind::binary:
      collect_variables(*n.lhs, out);
      collect_variables(*n.rhs, out);
      return;
  }
}

// Recursive-descent parser.  Unary minus sits between '*' '/' and '^', so
// -x^2 reads as -(x^2) while 2*-x is still accepted.
class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text) {
    for (const auto& v : vars) vars_.insert(v);
  }

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("end of input");
    return e;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::set<std::string> vars_;

  [[noreturn]] void fail(const std::string& expected) {
    std::string got = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    throw parse_error("expected " + expected + ", got " + got, pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_expr() {
    NodePtr e = parse_term();
    for (;;) {
      std::size_t at = pos_;
      if (accept('+')) {
        e = make_binary(BinaryOp::add, e, parse_term(), static_cast<long>(at));
      } else if (accept('-')) {
        e = make_binary(BinaryOp::sub, e, parse_term(), static_cast<long>(at));
      } else {
        return e;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_unary();
    for (;;) {
      std::size_t at = pos_;
      if (accept('*')) {
        e = make_binary(BinaryOp::mul, e, parse_unary(), static_cast<long>(at));
      } else if (accept('/')) {
        e = make_binary(BinaryOp::div, e, parse_unary(), static_cast<long>(at));
      } else {
        return e;
      }
    }
  }

  NodePtr parse_unary() {
    std::size_t at = pos_;
    if (accept('-')) return make_unary(UnaryOp::neg, parse_unary(), static_cast<long>(at));
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    std::size_t at = pos_;
    if (accept('^')) {
      // right associative: exponent may itself contain ^ or a leading -
      return make_binary(BinaryOp::pow, base, parse_unary(), static_cast<long>(at));
    }
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("a value");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!accept(')')) fail("')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail("a number, name or '('");
  }

  NodePtr parse_number() {
    std::size_t at = pos_;
    // strtod accepts leading signs and hex floats; the grammar has already
    // stripped signs and a digit or '.' is guaranteed here.
    std::string tail(text_.substr(pos_));
    const char* begin = tail.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return make_constant(v, static_cast<long>(at));
  }

  NodePtr parse_name() {
    std::size_t at = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(at, pos_ - at));
    if (peek() == '(') {
      accept('(');
      NodePtr arg = parse_expr();
      if (!accept(')')) fail("')'");
      long p = static_cast<long>(at);
      if (name == "sin") return make_unary(UnaryOp::sin, arg, p);
      if (name == "cos") return make_unary(UnaryOp::cos, arg, p);
      if (name == "tan") return make_unary(UnaryOp::tan, arg, p);
      if (name == "atan") return make_unary(UnaryOp::atan, arg, p);
      if (name == "tanh") return make_unary(UnaryOp::tanh, arg, p);
      if (name == "sinh") return make_unary(UnaryOp::sinh, arg, p);
      if (name == "cosh") return make_unary(UnaryOp::cosh, arg, p);
      if (name == "exp") return make_unary(UnaryOp::exp, arg, p);
      if (name == "ln") return make_unary(UnaryOp::ln, arg, p);
      if (name == "sqrt") return make_unary(UnaryOp::sqrt, arg, p);
      if (name == "abs") return make_unary(UnaryOp::abs, arg, p);
      if (name == "sech")
        return make_binary(BinaryOp::div, make_constant(1.0), make_unary(UnaryOp::cosh, arg, p), p);
      throw parse_error("unknown function '" + name + "'", at);
    }
    if (!vars_.count(name)) throw parse_error("unknown variable '" + name + "'", at);
    return make_variable(name, static_cast<long>(at));
  }
};

void compile_node(const Node& n, const std::map<std::string, int>& slots,
                  std::vector<CompiledExpr::Op>& out);

}  // namespace

parse_error::parse_error(const std::string& msg, std::size_t pos)
    : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}

Expr::Expr() : root_(make_constant(0.0)) {}

Expr Expr::constant(double v) { return Expr(make_constant(v)); }

Expr Expr::variable(const std::string& name) { return Expr(make_variable(name)); }

Expr Expr::parse(std::string_view text, const std::vector<std::string>& allowed_vars) {
  return Expr(Parser(text, allowed_vars).run());
}

double Expr::eval(const std::map<std::string, double>& bindings) const {
  return eval_node(*root_, bindings);
}

Expr Expr::derivative(const std::string& var) const { return Expr(diff_node(root_, var)); }

namespace {

NodePtr subst_node(const NodePtr& n, const std::string& var, const NodePtr& repl) {
  switch (n->kind) {
    case Kind::constant:
      return n;
    case Kind::variable:
      return n->name == var ? repl : n;
    case Kind::unary: {
      NodePtr a = subst_node(n->lhs, var, repl);
      return a == n->lhs ? n : make_unary(n->uop, a, n->pos);
    }
    case Kind::binary: {
      NodePtr a = subst_node(n->lhs, var, repl);
      NodePtr b = subst_node(n->rhs, var, repl);
      return (a == n->lhs && b == n->rhs) ? n : make_binary(n->bop, a, b, n->pos);
    }
  }
  return n;
}

}  // namespace

Expr Expr::substitute(const std::string& var, const Expr& replacement) const {
  return Expr(subst_node(root_, var, replacement.root_));
}

std::string Expr::str() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

std::set<std::string> Expr::variables() const {
  std::set<std::string> out;
  collect_variables(*root_, out);
  return out;
}

bool Expr::is_constant() const { return root_->kind == Node::Kind::constant; }

double Expr::constant_value() const {
  if (root_->kind != Node::Kind::constant) throw eval_error("expression is not a constant");
  return root_->value;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr(make_binary(BinaryOp::add, a.root_, b.root_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make_binary(BinaryOp::sub, a.root_, b.root_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(make_binary(BinaryOp::mul, a.root_, b.root_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make_binary(BinaryOp::div, a.root_, b.root_)); }
Expr operator-(const Expr& a) { return Expr(make_unary(UnaryOp::neg, a.root_)); }
Expr pow(const Expr& a, const Expr& b) { return Expr(make_binary(BinaryOp::pow, a.root_, b.root_)); }
Expr apply(UnaryOp op, const Expr& a) { return Expr(make_unary(op, a.root_)); }

Expr sin(const Expr& e) { return apply(UnaryOp::sin, e); }
Expr cos(const Expr& e) { return apply(UnaryOp::cos, e); }
Expr tan(const Expr& e) { return apply(UnaryOp::tan, e); }
Expr atan(const Expr& e) { return apply(UnaryOp::atan, e); }
Expr tanh(const Expr& e) { return apply(UnaryOp::tanh, e); }
Expr sinh(const Expr& e) { return apply(UnaryOp::sinh, e); }
Expr cosh(const Expr& e) { return apply(UnaryOp::cosh, e); }
Expr exp(const Expr& e) { return apply(UnaryOp::exp, e); }
Expr ln(const Expr& e) { return apply(UnaryOp::ln, e); }
Expr sqrt(const Expr& e) { return apply(UnaryOp::sqrt, e); }
Expr abs(const Expr& e) { return apply(UnaryOp::abs, e); }

namespace {

void compile_node(const Node& n, const std::map<std::string, int>& slots,
                  std::vector<CompiledExpr::Op>& out) {
  using Op = CompiledExpr::Op;
  using Code = CompiledExpr::OpCode;
  switch (n.kind) {
    case Kind::constant: {
      Op op;
      op.code = Code::push_const;
      op.value = n.value;
      out.push_back(op);
      return;
    }
    case Kind::variable: {
      auto it = slots.find(n.name);
      if (it == slots.end()) throw eval_error("variable '" + n.name + "' not in compile ordering");
      Op op;
      op.code = Code::push_var;
      op.slot = it->second;
      out.push_back(op);
      return;
    }
    case Kind::unary: {
      compile_node(*n.lhs, slots, out);
      Op op;
      op.code = Code::unary;
      op.uop = n.uop;
      out.push_back(op);
      return;
    }
    case Kind::binary: {
      compile_node(*n.lhs, slots, out);
      compile_node(*n.rhs, slots, out);
      Op op;
      op.code = Code::binary;
      op.bop = n.bop;
      out.push_back(op);
      return;
    }
  }
}

}  // namespace

CompiledExpr Expr::compile(const std::vector<std::string>& var_order) const {
  std::map<std::string, int> slots;
  for (std::size_t i = 0; i < var_order.size(); ++i) slots[var_order[i]] = static_cast<int>(i);
  CompiledExpr c;
  c.arity_ = var_order.size();
  compile_node(*root_, slots, c.ops_);
  return c;
}

double CompiledExpr::operator()(std::span<const double> values) const {
  if (values.size() < arity_) throw eval_error("too few values for compiled expression");
  double stack[64];
  int top = -1;
  for (const Op& op : ops_) {
    switch (op.code) {
      case OpCode::push_const:
        stack[++top] = op.value;
        break;
      case OpCode::push_var:
        stack[++top] = values[static_cast<std::size_t>(op.slot)];
        break;
      case OpCode::unary:
        stack[top] = apply_unary(op.uop, stack[top], -1);
        break;
      case OpCode::binary: {
        double b = stack[top--];
        stack[top] = apply_binary(op.bop, stack[top], b, -1);
        break;
      }
    }
    if (top >= 63) throw eval_error("expression too deep for compiled evaluation");
  }
  return stack[0];
}

}  // namespace isospec
