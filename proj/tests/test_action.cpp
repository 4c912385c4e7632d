#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nambu/action.hpp"

using namespace nambu;

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<double> kEpsilons{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};

Cycle rotor_loop(int n = 128) {
  return Cycle::loop(3, n, 0.0, [](double th) { return std::vector<double>{1.0 + std::cos(th), 0.0, std::sin(th)}; });
}

Cycle euler_loop(int n = 128) {
  return Cycle::loop(3, n, 0.0, [](double th) {
    return std::vector<double>{1.0 + 0.1 * std::cos(th), 0.5 + 0.1 * std::sin(th), 0.2};
  });
}

VariationField spatial(const std::vector<std::string>& comps, std::vector<bool> clamped = {}) {
  return VariationField::from_exprs(comps, std::move(clamped));
}

}  // namespace

TEST(TakhtajanAction, RotorSurfaceClosedForm) {
  // On the rotor surface the integrand reduces to cos(theta) (r^2 cos 2t - sin^2 theta) / 2,
  // with r = 1 + cos(theta), giving pi sin(2) / 2 over t in [0, 1].
  const auto sys = builtin_system("rotor");
  const auto surface = build_solution_surface(sys, rotor_loop(), 1.0, 65);
  const auto s = takhtajan_action(sys, surface);
  EXPECT_LE(s.estimate, 1e-6);
  EXPECT_LE(std::abs(s.value - kPi * std::sin(2.0) / 2), 2 * s.estimate + 1e-12);
}

TEST(TakhtajanAction, DegenerateSurfaceOfFixedPoints) {
  const auto sys = builtin_system("rotor");
  const auto c = Cycle::loop(3, 32, 0.0, [](double th) { return std::vector<double>{0.0, 0.0, std::sin(th)}; });
  const auto surface = build_solution_surface(sys, c, 1.0, 9);
  EXPECT_NEAR(takhtajan_action(sys, surface).value, 0.0, 1e-14);
}

TEST(TakhtajanAction, TimeResolutionSelfConvergence) {
  const auto sys = builtin_system("euler-top");
  std::vector<double> s;
  for (int cols : {9, 17, 33}) s.push_back(takhtajan_action(sys, build_solution_surface(sys, euler_loop(), 2.0, cols)).value);
  const double d1 = std::abs(s[1] - s[0]), d2 = std::abs(s[2] - s[1]);
  EXPECT_GT(d1, 0.0);
  EXPECT_GE(std::log2(d1 / d2), 2.0);
}

TEST(TakhtajanAction, DimensionChecks) {
  const auto sys = builtin_system("rotor");
  const auto segment = parametric_chain({GridAxis::bounded(5, 0, 1, "s")}, {"s", "0", "0"}, 0.0);
  EXPECT_THROW(takhtajan_action(sys, segment), std::invalid_argument);
}

TEST(Variation, ClampedVariationIsSecondOrder) {
  const auto sys = builtin_system("euler-top");
  const auto surface = build_solution_surface(sys, euler_loop(), 1.0, 129);
  const auto w = spatial({"0", "t*(1 - t)", "t*(1 - t)*x1"}, {true, true, true});
  const auto r = vary_action(sys, surface, w, kEpsilons);
  EXPECT_EQ(r.clamp_violation, 0.0);
  EXPECT_GE(r.slope, 1.9);
  ASSERT_TRUE(r.boundary_prediction);
  EXPECT_EQ(*r.boundary_prediction, 0.0);
}

TEST(Variation, ZeroFieldGivesExactZero) {
  const auto sys = builtin_system("euler-top");
  const auto surface = build_solution_surface(sys, euler_loop(32), 1.0, 9);
  const auto r = vary_action(sys, surface, spatial({"0", "0", "0"}), kEpsilons);
  EXPECT_TRUE(r.all_zero);
  EXPECT_TRUE(std::isnan(r.slope));
  for (double d : r.deltas) EXPECT_EQ(d, 0.0);
}

TEST(Variation, FreeVariationMatchesBoundaryTerm) {
  const auto sys = builtin_system("euler-top");
  const auto surface = build_solution_surface(sys, euler_loop(), 1.0, 129);
  const auto w = spatial({"0", "0", "x2"}, {false, false, true});
  const auto r = vary_action(sys, surface, w, kEpsilons);
  ASSERT_TRUE(r.boundary_prediction);
  EXPECT_GT(std::abs(*r.boundary_prediction), 1e-4);
  EXPECT_LE(r.relative_mismatch(), 0.05);
  EXPECT_GE(r.clamp_violation, 0.6 - 1e-12);
}

TEST(Variation, BoundaryTermOnInitialLoop) {
  // With W = x2 d/dx3 the c1 contribution is -(loop integral of x1 x2 dx2) = -0.005 pi.
  const auto sys = builtin_system("euler-top");
  const auto surface = build_solution_surface(sys, euler_loop(), 1e-9, 2);
  EXPECT_NEAR(boundary_term(sys, surface, spatial({"0", "0", "x2"})), 0.0, 1e-8);
  const int nc = 4;
  const auto form = wedge(DifferentialForm::scalar(nc, parse("-x1*x2")), DifferentialForm::differential(nc, 1));
  EXPECT_NEAR(integrate_over_cycle(form, euler_loop()).value, -0.005 * kPi, 1e-13);
}

TEST(Variation, RotorVerticalShift) {
  const auto sys = builtin_system("rotor");
  const auto surface = build_solution_surface(sys, rotor_loop(), 1.0, 33);
  const auto r = vary_action(sys, surface, spatial({"0", "0", "1"}), kEpsilons);
  EXPECT_NEAR(*r.boundary_prediction, 0.0, 1e-10);
  for (double d : r.deltas) EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(Variation, InputValidation) {
  const auto sys = builtin_system("rotor");
  const auto surface = build_solution_surface(sys, rotor_loop(16), 1.0, 3);
  const auto w = spatial({"1", "0", "0"});
  EXPECT_THROW(vary_action(sys, surface, w, {1e-2, 1e-3}), std::invalid_argument);
  EXPECT_THROW(vary_action(sys, surface, w, {1e-3, 1e-2, 1e-4}), std::invalid_argument);
  EXPECT_THROW(vary_action(sys, surface, w, {1e-2, 0.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(vary_action(sys, surface, spatial({"100", "0", "0"}), {1.0, 0.5, 0.25}), FlowError);
  EXPECT_THROW(VariationField(VectorField::coordinate(4, 3), {false, false, false}).at(std::vector<double>{0, 0, 0, 0}),
               std::invalid_argument);
}

TEST(HamiltonianAction, ClampedOscillatorVariation) {
  const auto hs = HamiltonianSystem::from_source(1, "(p^2 + q^2)/2", "sho");
  IntegratorParams params;
  params.h = 1e-3;
  const double t2 = 2.0;
  const auto traj = integrate(hs, ExtendedPoint({1.0, 0.0}, 0.0), t2, params);
  const auto w = VariationField::from_exprs({"t*(2 - t)", "q*t"}, {true, false}, VariableScheme::canonical(1));
  const auto r = hamiltonian_action_check(hs, traj, w, kEpsilons);
  EXPECT_EQ(r.clamp_violation, 0.0);
  EXPECT_NEAR(*r.boundary_prediction, 0.0, 1e-15);
  EXPECT_GE(r.slope, 1.9);
  // S = integral of p dq - H dt = integral of (sin^2 t - 1/2) dt = -sin(2 t2) / 4 on q = cos t.
  EXPECT_NEAR(r.action, -std::sin(2 * t2) / 4, 1e-9);
}

TEST(HamiltonianAction, FreeEndpointQuarterPeriod) {
  const auto hs = HamiltonianSystem::from_source(1, "(p^2 + q^2)/2", "sho");
  IntegratorParams params;
  params.h = 1e-3;
  const auto traj = integrate(hs, ExtendedPoint({1.0, 0.0}, 0.0), kPi / 2, params);
  const auto w = VariationField::from_exprs({"1", "0"}, {}, VariableScheme::canonical(1));
  const auto r = hamiltonian_action_check(hs, traj, w, kEpsilons);
  EXPECT_NEAR(*r.boundary_prediction, -1.0, 1e-9);
  EXPECT_NEAR(r.first_variation, -1.0, 1e-3);
  EXPECT_LE(r.relative_mismatch(), 0.05);
}

TEST(HamiltonianAction, CsvOutput) {
  ActionReport r;
  r.epsilons = {0.5, 0.25};
  r.deltas = {1.0, -0.125};
  std::ostringstream os;
  r.write_csv(os);
  EXPECT_EQ(os.str(), "epsilon,delta_s\n0.5,1\n0.25,-0.125\n");
}
