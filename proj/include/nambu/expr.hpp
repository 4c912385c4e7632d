#pragma once

// Scalar-field expressions: a small infix language over fixed variable
// names, evaluated in double, Dual or Jet arithmetic.
//
// Grammar (lowest to highest precedence):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//
// Functions: sin cos exp log sqrt. Constant: pi. 0^0 evaluates to 1.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nambu/jet.hpp"

namespace nambu {

/// Slot reserved for time in every variable scheme.
inline constexpr int kTimeSlot = 6;
inline constexpr int kMaxSpatialSlots = 6;

class ExprError : public std::runtime_error {
 public:
  enum class Kind { syntax, unknown_identifier, arity, unbound_variable, domain };

  ExprError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what), kind_(kind), offset_(offset) {}

  Kind kind() const { return kind_; }
  /// Byte offset into the source for parse errors; npos for evaluation errors.
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

/// Maps identifier names to evaluation slots. Slots 0..5 are positional
/// arguments, slot 6 is time.
class VariableScheme {
 public:
  /// x1..x6 and t.
  static VariableScheme phase_space() {
    VariableScheme s;
    for (int i = 0; i < kMaxSpatialSlots; ++i) s.names_.emplace_back("x" + std::to_string(i + 1), i);
    s.names_.emplace_back("t", kTimeSlot);
    return s;
  }

  /// q1..qm, p1..pm aliased onto x1..x2m, plus the x names and t.
  static VariableScheme canonical(int dof) {
    if (dof < 1 || 2 * dof > kMaxSpatialSlots) throw std::invalid_argument("canonical scheme: dof must be 1..3");
    VariableScheme s = phase_space();
    for (int a = 0; a < dof; ++a) {
      s.names_.emplace_back("q" + std::to_string(a + 1), a);
      s.names_.emplace_back("p" + std::to_string(a + 1), dof + a);
    }
    if (dof == 1) {
      s.names_.emplace_back("q", 0);
      s.names_.emplace_back("p", 1);
    }
    return s;
  }

  /// Positional parameter names, e.g. {"r", "theta"} for parametric chains.
  static VariableScheme parameters(const std::vector<std::string>& names) {
    if (names.size() > static_cast<std::size_t>(kMaxSpatialSlots))
      throw std::invalid_argument("parameter scheme: too many names");
    VariableScheme s;
    for (std::size_t i = 0; i < names.size(); ++i) s.names_.emplace_back(names[i], static_cast<int>(i));
    return s;
  }

  std::optional<int> lookup(std::string_view name) const {
    for (const auto& [n, slot] : names_)
      if (n == name) return slot;
    return std::nullopt;
  }

 private:
  std::vector<std::pair<std::string, int>> names_;
};

namespace detail {

enum class Op { constant, variable, neg, add, sub, mul, div, pow, sin, cos, exp, log, sqrt };

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  int slot = -1;
  std::string name;
  std::shared_ptr<const Node> lhs, rhs;
};

using NodePtr = std::shared_ptr<const Node>;

}  // namespace detail

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) {
    auto n = std::make_shared<detail::Node>();
    n->op = detail::Op::constant;
    n->value = v;
    return Expr(std::move(n));
  }

  const detail::Node& root() const { return *root_; }

  /// Largest positional slot referenced, or -1 if none.
  int max_slot() const { return max_slot_; }
  bool uses_time() const { return uses_time_; }
  bool is_constant() const { return max_slot_ < 0 && !uses_time_; }
  bool uses_slot(int slot) const { return slot >= 0 && slot < 32 && ((slot_mask_ >> slot) & 1u); }

  explicit Expr(detail::NodePtr root) : root_(std::move(root)) { scan(*root_); }

 private:
  void scan(const detail::Node& n) {
    if (n.op == detail::Op::variable) {
      if (n.slot == kTimeSlot)
        uses_time_ = true;
      else
        max_slot_ = std::max(max_slot_, n.slot);
      slot_mask_ |= 1u << n.slot;
    }
    if (n.lhs) scan(*n.lhs);
    if (n.rhs) scan(*n.rhs);
  }

  detail::NodePtr root_;
  int max_slot_ = -1;
  bool uses_time_ = false;
  unsigned slot_mask_ = 0;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const VariableScheme& scheme) : src_(src), scheme_(scheme) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw ExprError(ExprError::Kind::syntax, pos_, "empty expression");
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) fail_syntax("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail_syntax(const std::string& msg) const {
    throw ExprError(ExprError::Kind::syntax, pos_, "syntax error at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr make(Op op, NodePtr lhs, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = make(Op::add, lhs, parse_term());
      else if (accept('-'))
        lhs = make(Op::sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Op::mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = make(Op::div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make(Op::neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make(Op::pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail_syntax("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!accept(')')) fail_syntax("expected ')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail_syntax("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail_syntax("malformed number");
    }
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = v;
    return n;
  }

  NodePtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    static const std::pair<const char*, Op> functions[] = {
        {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"log", Op::log}, {"sqrt", Op::sqrt}};
    for (const auto& [fname, op] : functions) {
      if (name != fname) continue;
      if (!accept('(')) fail_syntax("expected '(' after " + name);
      NodePtr arg = parse_expr();
      std::size_t nargs = 1;
      while (accept(',')) {
        parse_expr();
        ++nargs;
      }
      if (!accept(')')) fail_syntax("expected ')'");
      if (nargs != 1)
        throw ExprError(ExprError::Kind::arity, start,
                        name + " takes 1 argument, got " + std::to_string(nargs) + " (offset " +
                            std::to_string(start) + ")");
      return make(op, arg);
    }
    if (name == "pi") {
      auto n = std::make_shared<Node>();
      n->op = Op::constant;
      n->value = std::numbers::pi;
      return n;
    }
    const auto slot = scheme_.lookup(name);
    if (!slot)
      throw ExprError(ExprError::Kind::unknown_identifier, start,
                      "unknown identifier '" + name + "' at offset " + std::to_string(start));
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->slot = *slot;
    n->name = name;
    return n;
  }

  std::string_view src_;
  const VariableScheme& scheme_;
  std::size_t pos_ = 0;
};

[[noreturn]] inline void domain_error(const std::string& what) {
  throw ExprError(ExprError::Kind::domain, std::string::npos, "domain error: " + what);
}

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

template <class T>
T eval_node(const Node& n, std::span<const T> args, const T& t) {
  switch (n.op) {
    case Op::constant:
      return T(n.value);
    case Op::variable:
      if (n.slot == kTimeSlot) return t;
      if (n.slot >= static_cast<int>(args.size()))
        throw ExprError(ExprError::Kind::unbound_variable, std::string::npos, "unbound variable '" + n.name + "'");
      return args[n.slot];
    case Op::neg:
      return -eval_node(*n.lhs, args, t);
    case Op::add:
      return eval_node(*n.lhs, args, t) + eval_node(*n.rhs, args, t);
    case Op::sub:
      return eval_node(*n.lhs, args, t) - eval_node(*n.rhs, args, t);
    case Op::mul:
      return eval_node(*n.lhs, args, t) * eval_node(*n.rhs, args, t);
    case Op::div: {
      T den = eval_node(*n.rhs, args, t);
      if (value_of(den) == 0.0) domain_error("division by zero");
      return eval_node(*n.lhs, args, t) / den;
    }
    case Op::pow: {
      T base = eval_node(*n.lhs, args, t);
      T expo = eval_node(*n.rhs, args, t);
      const double b = value_of(base), e = value_of(expo);
      if (b < 0.0 && !is_integer(e)) domain_error("negative base with non-integer exponent");
      if (b == 0.0 && e < 0.0) domain_error("zero raised to a negative power");
      using std::pow;
      return pow(base, expo);
    }
    case Op::sin: {
      using std::sin;
      return sin(eval_node(*n.lhs, args, t));
    }
    case Op::cos: {
      using std::cos;
      return cos(eval_node(*n.lhs, args, t));
    }
    case Op::exp: {
      using std::exp;
      return exp(eval_node(*n.lhs, args, t));
    }
    case Op::log: {
      T a = eval_node(*n.lhs, args, t);
      if (!(value_of(a) > 0.0)) domain_error("log of non-positive value");
      using std::log;
      return log(a);
    }
    case Op::sqrt: {
      T a = eval_node(*n.lhs, args, t);
      if (value_of(a) < 0.0) domain_error("sqrt of negative value");
      using std::sqrt;
      return sqrt(a);
    }
  }
  throw std::logic_error("unreachable");
}

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void render_node(const Node& n, std::string& out) {
  auto bin = [&](const char* op) {
    out += '(';
    render_node(*n.lhs, out);
    out += op;
    render_node(*n.rhs, out);
    out += ')';
  };
  auto fn = [&](const char* name) {
    out += name;
    out += '(';
    render_node(*n.lhs, out);
    out += ')';
  };
  switch (n.op) {
    case Op::constant:
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += "(-";
        out += format_number(-n.value);
        out += ')';
      } else {
        out += format_number(n.value);
      }
      return;
    case Op::variable:
      out += n.name;
      return;
    case Op::neg:
      out += "(-";
      render_node(*n.lhs, out);
      out += ')';
      return;
    case Op::add: return bin("+");
    case Op::sub: return bin("-");
    case Op::mul: return bin("*");
    case Op::div: return bin("/");
    case Op::pow: return bin("^");
    case Op::sin: return fn("sin");
    case Op::cos: return fn("cos");
    case Op::exp: return fn("exp");
    case Op::log: return fn("log");
    case Op::sqrt: return fn("sqrt");
  }
}

}  // namespace detail

/// Parses an expression. Throws ExprError with the byte offset of the
/// offending token.
inline Expr parse(std::string_view source, const VariableScheme& scheme = VariableScheme::phase_space()) {
  detail::Parser p(source, scheme);
  return Expr(p.parse());
}

/// Fully parenthesized rendering that parses back to an identical tree.
inline std::string render(const Expr& e) {
  std::string out;
  detail::render_node(e.root(), out);
  return out;
}

template <class T>
T eval_as(const Expr& e, std::span<const T> args, const T& t) {
  return detail::eval_node<T>(e.root(), args, t);
}

inline double eval(const Expr& e, std::span<const double> args, double t = 0.0) {
  return eval_as<double>(e, args, t);
}

inline double eval(const Expr& e, std::initializer_list<double> args, double t = 0.0) {
  return eval(e, std::span<const double>(args.begin(), args.size()), t);
}

/// (de/dx1, ..., de/dxn, de/dt) by one forward-mode pass per variable.
inline std::vector<double> gradient(const Expr& e, std::span<const double> args, double t = 0.0) {
  const std::size_t n = args.size();
  std::vector<double> grad(n + 1, 0.0);
  std::vector<Dual> duals(args.begin(), args.end());
  for (std::size_t seed = 0; seed <= n; ++seed) {
    for (std::size_t i = 0; i < n; ++i) duals[i].derivative = (i == seed) ? 1.0 : 0.0;
    const Dual td(t, seed == n ? 1.0 : 0.0);
    grad[seed] = eval_as<Dual>(e, duals, td).derivative;
  }
  return grad;
}

inline std::vector<double> gradient(const Expr& e, std::initializer_list<double> args, double t = 0.0) {
  return gradient(e, std::span<const double>(args.begin(), args.size()), t);
}

}  // namespace nambu
