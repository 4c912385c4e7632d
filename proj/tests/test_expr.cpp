#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nambu/expr.hpp"
#include "nambu/jet.hpp"

using namespace nambu;

namespace {

double at(const std::string& src, std::vector<double> x, double t = 0.0) { return eval(parse(src), x, t); }

ExprError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const ExprError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected ExprError";
  return ExprError::Kind::syntax;
}

/// Random polynomial-ish expression over x1..x3 and t, built as text.
std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const char* vars[] = {"x1", "x2", "x3", "t"};
  if (depth == 0) {
    const int k = pick(rng);
    if (k < 6) return vars[k % 4];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", coef(rng));
    return std::string("(") + buf + ")";
  }
  const std::string a = random_expr(rng, depth - 1), b = random_expr(rng, depth - 1);
  switch (pick(rng)) {
    case 0: case 1: case 2: return "(" + a + " + " + b + ")";
    case 3: case 4: return "(" + a + " - " + b + ")";
    case 5: case 6: case 7: return a + "*" + b;
    case 8: return "(" + a + ")^2";
    default: return "-" + a;
  }
}

}  // namespace

TEST(Parse, HalfSquare) { EXPECT_DOUBLE_EQ(at("x1^2/2", {3.0}), 4.5); }

TEST(Parse, SyntaxErrorPointsAtStar) {
  try {
    parse("x1 + * x2");
    FAIL() << "should not parse";
  } catch (const ExprError& e) {
    EXPECT_EQ(e.kind(), ExprError::Kind::syntax);
    EXPECT_EQ(e.offset(), 5u);
  }
}

TEST(Parse, EulerTopEnergy) {
  const double oracle = 1.0 / 2 + 0.25 / 4 + 0.04 / 6;
  EXPECT_NEAR(at("x1^2/2 + x2^2/4 + x3^2/6", {1.0, 0.5, 0.2}), oracle, 1e-15);
  EXPECT_NEAR(oracle, 0.5691666666666667, 1e-15);
}

TEST(Parse, PrecedenceAndAssociativity) {
  EXPECT_DOUBLE_EQ(at("2^3^2", {}), 512.0);
  EXPECT_DOUBLE_EQ(at("-2^2", {}), -4.0);
  EXPECT_DOUBLE_EQ(at("8/2/2", {}), 2.0);
  EXPECT_DOUBLE_EQ(at("1 - 2 - 3", {}), -4.0);
  EXPECT_DOUBLE_EQ(at("2*3 + 4*5", {}), 26.0);
  EXPECT_DOUBLE_EQ(at("(1 + 2)*3", {}), 9.0);
  EXPECT_DOUBLE_EQ(at("2.5e1", {}), 25.0);
}

TEST(Parse, ErrorsCarryKinds) {
  EXPECT_EQ(error_kind([] { parse("y1 + 1"); }), ExprError::Kind::unknown_identifier);
  EXPECT_EQ(error_kind([] { parse("sin(x1, x2)"); }), ExprError::Kind::arity);
  EXPECT_EQ(error_kind([] { parse("foo(x1)"); }), ExprError::Kind::unknown_identifier);
  EXPECT_EQ(error_kind([] { parse(""); }), ExprError::Kind::syntax);
  EXPECT_EQ(error_kind([] { parse("(x1 + 2"); }), ExprError::Kind::syntax);
}

TEST(Parse, EveryFailureHasPosition) {
  for (const char* bad : {"x1 +", "*", "x1 x2", "sin(", "2 ^", "((x1)", "x1 + )"}) {
    try {
      parse(bad);
      ADD_FAILURE() << bad;
    } catch (const ExprError& e) {
      EXPECT_LE(e.offset(), std::string(bad).size()) << bad;
    }
  }
}

TEST(Eval, Examples) {
  EXPECT_DOUBLE_EQ(at("2.5", {7.0, 8.0}), 2.5);
  EXPECT_DOUBLE_EQ(at("sin(t)", {}, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(at("x1*x2 - x3", {2.0, 3.0, 5.0}), 1.0);
  EXPECT_DOUBLE_EQ(at("0^0", {}), 1.0);
  EXPECT_NEAR(at("pi", {}), M_PI, 0.0);
}

TEST(Eval, DomainErrorsAreReported) {
  EXPECT_EQ(error_kind([] { at("log(x1)", {0.0}); }), ExprError::Kind::domain);
  EXPECT_EQ(error_kind([] { at("log(x1)", {-1.0}); }), ExprError::Kind::domain);
  EXPECT_EQ(error_kind([] { at("sqrt(x1)", {-1.0}); }), ExprError::Kind::domain);
  EXPECT_EQ(error_kind([] { at("1/x1", {0.0}); }), ExprError::Kind::domain);
  EXPECT_EQ(error_kind([] { at("x1^0.5", {-4.0}); }), ExprError::Kind::domain);
  EXPECT_EQ(error_kind([] { at("x3 + 1", {1.0, 2.0}); }), ExprError::Kind::unbound_variable);
}

TEST(Gradient, Examples) {
  auto g = gradient(parse("x1*x2"), {3.0, 4.0, 0.0});
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  g = gradient(parse("(x1^2+x2^2+x3^2)/2"), {1.0, 2.0, 3.0});
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 2.0);
  EXPECT_DOUBLE_EQ(g[2], 3.0);
  EXPECT_DOUBLE_EQ(g[3], 0.0);
  g = gradient(parse("sin(x1)*t"), {0.0, 0.0, 0.0}, 2.0);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[3], 0.0);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    const Expr e = parse(random_expr(rng, 3));
    std::vector<double> x{u(rng), u(rng), u(rng)};
    double t = u(rng);
    const auto g = gradient(e, x, t);
    for (int i = 0; i < 4; ++i) {
      double& c = i < 3 ? x[i] : t;
      const double c0 = c, h = 1e-6 * std::max(1.0, std::abs(c0));
      c = c0 + h;
      const double fp = eval(e, x, t);
      c = c0 - h;
      const double fm = eval(e, x, t);
      c = c0;
      const double fd = (fp - fm) / (2 * h);
      const double scale = std::max({1.0, std::abs(g[i]), std::abs(fd)});
      EXPECT_LE(std::abs(g[i] - fd) / scale, 1e-6) << render(e) << " coordinate " << i;
    }
  }
}

TEST(Render, RoundTripEvaluatesIdentically) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Expr e = parse(random_expr(rng, 4));
    const Expr back = parse(render(e));
    for (int k = 0; k < 5; ++k) {
      const std::vector<double> x{u(rng), u(rng), u(rng)};
      const double t = u(rng);
      EXPECT_EQ(eval(e, x, t), eval(back, x, t)) << render(e);
    }
  }
  const Expr f = parse("exp(-x1)*cos(x2) + log(2 + x3^2)/sqrt(3)");
  EXPECT_EQ(eval(f, {0.3, 0.4, 0.5}), eval(parse(render(f)), {0.3, 0.4, 0.5}));
}

TEST(Schemes, CanonicalAndParameters) {
  const Expr h = parse("p1^2/2 + q1^2/2", VariableScheme::canonical(1));
  EXPECT_DOUBLE_EQ(eval(h, {1.0, 2.0}), 2.5);
  const Expr c = parse("cos(theta)*r", VariableScheme::parameters({"theta", "r"}));
  EXPECT_DOUBLE_EQ(eval(c, {0.0, 3.0}), 3.0);
  EXPECT_THROW(parse("x1", VariableScheme::parameters({"theta"})), ExprError);
}

TEST(DualNumber, ProductAndChainRule) {
  const Dual x(0.7, 1.0);
  const Dual y = sin(x) * exp(x);
  EXPECT_NEAR(y.derivative, std::cos(0.7) * std::exp(0.7) + std::sin(0.7) * std::exp(0.7), 1e-15);
  const Dual z = sqrt(x * x + Dual(1.0));
  EXPECT_NEAR(z.derivative, 0.7 / std::sqrt(1.49), 1e-15);
}

TEST(JetTaylor, SecondDerivativesOfProduct) {
  // f = x^2 y^3 at (2, 1): f_xx = 2 y^3 = 2, f_xy = 6 x y^2 = 12, f_yy = 6 x^2 y = 24.
  const Jet x = Jet::variable(2.0, 0, 2, 3), y = Jet::variable(1.0, 1, 2, 3);
  const Jet f = x * x * y * y * y;
  EXPECT_DOUBLE_EQ(f.value(), 4.0);
  EXPECT_DOUBLE_EQ(f.derivative(0).derivative(0).value(), 2.0);
  EXPECT_DOUBLE_EQ(f.derivative(0).derivative(1).value(), 12.0);
  EXPECT_DOUBLE_EQ(f.derivative(1).derivative(1).value(), 24.0);
}

TEST(JetTaylor, TranscendentalThirdDerivatives) {
  const double a = 0.4;
  const Jet x = Jet::variable(a, 0, 1, 3);
  const auto third = [](const Jet& j) { return j.derivative(0).derivative(0).derivative(0).value(); };
  EXPECT_NEAR(third(sin(x)), -std::cos(a), 1e-13);
  EXPECT_NEAR(third(exp(x)), std::exp(a), 1e-13);
  EXPECT_NEAR(third(log(x + 1.0)), 2.0 / std::pow(1.0 + a, 3), 1e-12);
  EXPECT_NEAR(third(sqrt(x + 1.0)), 3.0 / 8.0 * std::pow(1.0 + a, -2.5), 1e-12);
  EXPECT_NEAR(third(pow(x + 1.0, 2.5)), 2.5 * 1.5 * 0.5 * std::pow(1.0 + a, -0.5), 1e-12);
  EXPECT_NEAR(third(1.0 / (x + 1.0)), -6.0 / std::pow(1.0 + a, 4), 1e-12);
}
