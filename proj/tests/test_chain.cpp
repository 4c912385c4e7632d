#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nambu/chain.hpp"

using namespace nambu;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kN = 4;

DifferentialForm one_form(std::vector<std::string> coeffs) {
  std::vector<DifferentialForm::Term> terms;
  for (int i = 0; i < static_cast<int>(coeffs.size()); ++i) terms.push_back({parse(coeffs[i]), {i}});
  return DifferentialForm::from_terms(kN, 1, terms);
}

Cycle unit_circle(int n) {
  return Cycle::loop(3, n, 0.0, [](double th) { return std::vector<double>{std::cos(th), std::sin(th), 0.0}; });
}

Chain square(int m, const std::vector<std::string>& embedding = {"u", "v", "0.3"}) {
  return parametric_chain({GridAxis::bounded(m, 0.0, 1.0, "u"), GridAxis::bounded(m, 0.0, 1.0, "v")}, embedding,
                          0.2);
}

}  // namespace

TEST(CycleIntegral, GreenAreaOfUnitCircle) {
  const auto r = integrate_over_cycle(one_form({"0", "x1"}), unit_circle(64));
  EXPECT_NEAR(r.value, kPi, 1e-10);
  EXPECT_LE(r.estimate, 1e-8);
}

TEST(CycleIntegral, ExactFormOverClosedLoop) {
  const auto loop = Cycle::loop(3, 96, 0.5, [](double th) {
    return std::vector<double>{std::cos(th) + 0.3 * std::sin(3 * th), std::sin(2 * th), 0.1 * std::cos(5 * th)};
  });
  EXPECT_NEAR(integrate_over_cycle(one_form({"1"}), loop).value, 0.0, 1e-12);
}

TEST(CycleIntegral, HalfRadiusSquaredDx3) {
  const auto loop = Cycle::loop(3, 256, 0.0, [](double th) {
    return std::vector<double>{1.0 + std::cos(th), 0.0, std::sin(th)};
  });
  const auto r = integrate_over_cycle(one_form({"0", "0", "(x1^2+x2^2)/2"}), loop);
  EXPECT_NEAR(r.value, kPi, 1e-9);
}

TEST(CycleIntegral, SpectralConvergence) {
  // Ellipse area pi a b via x1 dx2; trapezoid error falls far below any fixed power.
  const double a = 1.7, b = 0.6;
  double last = 1.0;
  for (int n : {16, 32, 64}) {
    const auto loop = Cycle::loop(3, n, 0.0, [&](double th) {
      return std::vector<double>{a * std::cos(th) + 0.2 * std::cos(2 * th), b * std::sin(th), 0.0};
    });
    const double err = std::abs(integrate_over_cycle(one_form({"0", "x1"}), loop).value - kPi * a * b);
    EXPECT_LE(err, std::max(1e-13, last * 1e-2)) << n;
    last = err;
  }
}

TEST(CycleIntegral, ReversalNegatesExactly) {
  const auto c = unit_circle(64);
  const auto a = one_form({"x2*x3", "x1 + x1^3", "cos(x2)"});
  EXPECT_EQ(integrate_over_cycle(a, c.reversed()).value, -integrate_over_cycle(a, c).value);
}

TEST(CycleIntegral, Errors) {
  EXPECT_THROW(integrate_over_cycle(one_form({"0", "x1"}), unit_circle(7)), std::invalid_argument);
  EXPECT_THROW(integrate_over_cycle(one_form({"1"}), Cycle::from_samples(3, {8, 8}, std::vector<double>(3 * 64), 0.0)),
               std::invalid_argument);
  EXPECT_THROW(Cycle(parametric_chain({GridAxis::bounded(9, 0, 1, "u")}, {"u", "0", "0"}, 0.0)),
               std::invalid_argument);
}

TEST(TorusIntegral, TwoCycleInFourDimensions) {
  // Torus (cos a, sin a, r cos b, r sin b): x1 x3 dx2 ^ dx4 integrates to (pi)(pi r^2).
  const double r = 0.5;
  std::vector<double> xs;
  const int na = 32, nb = 32;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double al = 2 * kPi * i / na, be = 2 * kPi * j / nb;
      xs.insert(xs.end(), {std::cos(al), std::sin(al), r * std::cos(be), r * std::sin(be)});
    }
  const auto torus = Cycle::from_samples(4, {na, nb}, xs, 0.0);
  const auto form = DifferentialForm::from_terms(5, 2, {{parse("x1*x3"), {1, 3}}});
  EXPECT_NEAR(integrate_over_cycle(form, torus).value, kPi * kPi * r * r, 1e-10);
  EXPECT_TRUE(boundary(torus.chain()).empty());
}

TEST(ChainIntegral, FlatSquareArea) {
  const auto area = DifferentialForm::from_terms(kN, 2, {{parse("1"), {0, 1}}});
  EXPECT_NEAR(integrate_over_chain(area, square(33)).value, 1.0, 1e-10);
}

TEST(ChainIntegral, DegenerateGridIsZero) {
  const auto pinched = parametric_chain({GridAxis::bounded(17, 0, 1, "u"), GridAxis::periodic_axis(16)},
                                        {"0.4", "-0.1", "0.7"}, 1.0);
  const auto form = DifferentialForm::from_terms(kN, 2, {{parse("1 + x1^2"), {0, 1}}, {parse("x3"), {1, 2}}});
  EXPECT_EQ(integrate_over_chain(form, pinched).value, 0.0);
  const auto single = parametric_chain({GridAxis::bounded(1, 0, 0, "u"), GridAxis::bounded(1, 0, 0, "v")},
                                       {"1", "2", "3"}, 0.0);
  EXPECT_EQ(integrate_over_chain(form, single).value, 0.0);
}

TEST(ChainIntegral, BoundedQuadratureIsFourthOrder) {
  // Integral of exp(x1) dx1 over x1 = u on [0, 1]; exact e - 1.
  const auto f = one_form({"exp(x1)"});
  double errs[2];
  int k = 0;
  for (int m : {17, 33}) {
    const auto seg = parametric_chain({GridAxis::bounded(m, 0, 1, "u")}, {"u", "0", "0"}, 0.0);
    errs[k++] = std::abs(integrate_over_chain(f, seg).value - (std::exp(1.0) - 1.0));
  }
  EXPECT_GT(std::log2(errs[0] / errs[1]), 3.5);
}

TEST(ChainIntegral, ZeroChainEvaluatesScalar) {
  const auto point = parametric_chain({}, {"1", "2", "3"}, 0.5);
  EXPECT_DOUBLE_EQ(integrate_over_chain(DifferentialForm::scalar(kN, parse("x1 + x2*x3 + t")), point).value, 7.5);
}

TEST(Boundary, SegmentIsEndMinusStart) {
  const auto seg = parametric_chain({GridAxis::bounded(21, 0, 1, "u")}, {"u", "u^2", "1 - u"}, 0.0);
  const auto faces = boundary(seg);
  ASSERT_EQ(faces.size(), 2u);
  EXPECT_EQ(faces[0].sign, -1);
  EXPECT_EQ(faces[1].sign, 1);
  const auto f = DifferentialForm::scalar(kN, parse("x1*x2 + x3^3 + x1"));
  const double stokes = integrate_over_boundary(f, seg).value;
  EXPECT_DOUBLE_EQ(stokes, 2.0 - 1.0);
  const auto df = exterior_derivative(f);
  EXPECT_NEAR(integrate_over_chain(df, seg).value, stokes, 1e-8);
}

TEST(Boundary, DiskBoundaryIsOuterLoop) {
  const auto disk = parametric_chain({GridAxis::bounded(33, 0, 1, "r"), GridAxis::periodic_axis(64)},
                                     {"r*cos(theta)", "r*sin(theta)", "0"}, 0.0);
  const auto faces = boundary(disk);
  ASSERT_EQ(faces.size(), 2u);
  EXPECT_EQ(faces[1].sign, 1);
  EXPECT_NEAR(faces[1].face.sample(0)[0], 1.0, 1e-15);
  const auto area = DifferentialForm::from_terms(kN, 2, {{parse("1"), {0, 1}}});
  EXPECT_NEAR(integrate_over_chain(area, disk).value, kPi, 1e-10);
  EXPECT_NEAR(integrate_over_boundary(one_form({"0", "x1"}), disk).value, kPi, 1e-10);
}

TEST(Boundary, MissingMetadataThrows) {
  const auto s = square(9);
  const Chain opaque(s.ncoords(), s.axes(), std::vector<double>(s.data().begin(), s.data().end()), 1, false);
  EXPECT_THROW(boundary(opaque), std::invalid_argument);
}

TEST(Stokes, RandomOneFormsOnCurvedSquare) {
  std::mt19937_64 rng(5);
  const char* pool[] = {"x1*x2",    "sin(x3)*x1",  "x1^2 - x2", "exp(x2/3)*x1", "cos(x1 + x3)",
                        "x3^3 - x1*x2", "x2*x3 + 1", "log(2 + x1^2)", "sqrt(3 + x2^2)*x3"};
  const auto s = square(129, {"u + 0.2*v^2", "v - 0.1*sin(u)", "0.3*u*v"});
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<std::string> c;
    for (int i = 0; i < 3; ++i) c.push_back(pool[rng() % 9]);
    c.push_back("0");
    const auto a = one_form(c);
    const auto lhs = integrate_over_boundary(a, s);
    const auto rhs = integrate_over_chain(exterior_derivative(a), s);
    EXPECT_LE(std::abs(lhs.value - rhs.value), 1e-8) << c[0] << " | " << c[1] << " | " << c[2];
    EXPECT_LE(std::abs(lhs.value - rhs.value), std::max(1e-8, 10 * (lhs.estimate + rhs.estimate)));
  }
}

TEST(Stokes, DiskChainWithTimeDependence) {
  const auto disk = parametric_chain({GridAxis::bounded(65, 0, 1, "r"), GridAxis::periodic_axis(64)},
                                     {"r*cos(theta)", "0.5*r*sin(theta)", "r^2"}, 0.7);
  const auto a = one_form({"x2*t", "x1^2 + x3", "sin(x1*x2)", "0"});
  const auto lhs = integrate_over_boundary(a, disk);
  const auto rhs = integrate_over_chain(exterior_derivative(a), disk);
  EXPECT_LE(std::abs(lhs.value - rhs.value), std::max(1e-8, 10 * (lhs.estimate + rhs.estimate)));
}

TEST(Tangents, SpectralOnPeriodicFourthOrderOnBounded) {
  const auto c = unit_circle(32);
  const auto t = axis_tangents(c.chain(), 0);
  for (int j = 0; j < 32; ++j) {
    const double th = 2 * kPi * j / 32;
    EXPECT_NEAR(t[j * 4 + 0], -std::sin(th), 1e-13);
    EXPECT_NEAR(t[j * 4 + 1], std::cos(th), 1e-13);
  }
  const auto seg = parametric_chain({GridAxis::bounded(11, 0, 1, "u")}, {"u^4", "u^3", "0"}, 0.0);
  const auto ts = axis_tangents(seg, 0);
  for (int j = 0; j < 11; ++j) {
    const double u = j / 10.0;
    EXPECT_NEAR(ts[j * 4 + 1], 3 * u * u, 1e-12);
  }
}
