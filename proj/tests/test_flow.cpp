#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nambu/flow.hpp"

using namespace nambu;

namespace {

constexpr double kPi = std::numbers::pi;

Cycle unit_circle(int n, double t = 0.0) {
  return Cycle::loop(3, n, t, [](double th) { return std::vector<double>{std::cos(th), std::sin(th), 0.0}; });
}

double hval(const Expr& h, const ExtendedPoint& p) { return eval(h, p.x(), p.t()); }

}  // namespace

TEST(Integrate, RotorQuarterTurn) {
  const auto traj = integrate(builtin_system("rotor"), ExtendedPoint({1.0, 0.0, 0.0}, 0.0), kPi / 2);
  const auto end = traj.back();
  EXPECT_NEAR(end.x()[0], 0.0, 1e-8);
  EXPECT_NEAR(end.x()[1], -1.0, 1e-8);
  EXPECT_NEAR(end.x()[2], 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(end.t(), kPi / 2);
  EXPECT_DOUBLE_EQ(traj.front().t(), 0.0);
}

TEST(Integrate, EqualHamiltoniansGiveFixedPoint) {
  const NambuSystem sys({parse("x1*x2 + x3"), parse("x1*x2 + x3")});
  const ExtendedPoint p({0.3, -0.2, 0.5}, 1.0);
  const auto end = integrate(sys, p, 3.0).back();
  for (int i = 0; i < 3; ++i) EXPECT_EQ(end.x()[i], p.x()[i]);
}

TEST(Integrate, EulerTopConservesBothHamiltonians) {
  const auto sys = builtin_system("euler-top");
  const ExtendedPoint p({1.0, 0.5, 0.2}, 0.0);
  const auto end = integrate(sys, p, 10.0).back();
  for (const auto& h : sys.hamiltonians()) {
    const double h0 = hval(h, p);
    EXPECT_LE(std::abs(hval(h, end) - h0) / std::abs(h0), 1e-8);
  }
}

TEST(Integrate, AdaptiveMatchesClosedForm) {
  IntegratorParams ip;
  ip.method = Method::rk45_adaptive;
  ip.rtol = 1e-11;
  ip.atol = 1e-13;
  const auto traj = integrate(builtin_system("rotor"), ExtendedPoint({0.6, 0.8, 0.1}, 0.0), 5.0, ip);
  const auto end = traj.back();
  EXPECT_NEAR(end.x()[0], 0.6 * std::cos(5.0) + 0.8 * std::sin(5.0), 1e-8);
  EXPECT_NEAR(end.x()[1], 0.8 * std::cos(5.0) - 0.6 * std::sin(5.0), 1e-8);
  EXPECT_LT(traj.size(), 2000u);
}

TEST(Integrate, Rk4FittedOrder) {
  const auto sys = builtin_system("rotor");
  const double hs[] = {1e-1, 5e-2, 2.5e-2, 1.25e-2};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double h : hs) {
    IntegratorParams ip;
    ip.h = h;
    const auto end = integrate(sys, ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 2.0, ip).back();
    const double err = std::hypot(end.x()[0] - std::cos(2.0), end.x()[1] + std::sin(2.0));
    const double lx = std::log(h), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
  EXPECT_GE(slope, 3.8);
  EXPECT_LE(slope, 4.2);
}

TEST(Integrate, FlowComposes) {
  const auto sys = builtin_system("euler-top");
  const ExtendedPoint p({0.4, -0.7, 0.9}, 0.0);
  const auto direct = integrate(sys, p, 1.5).back();
  const auto mid = integrate(sys, p, 0.6).back();
  const auto composed = integrate(sys, mid, 1.5).back();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(direct.x()[i], composed.x()[i], 1e-11);
}

TEST(Integrate, BackwardRequiresFlag) {
  const auto sys = builtin_system("rotor");
  const ExtendedPoint p({1.0, 0.0, 0.0}, 1.0);
  EXPECT_THROW(integrate(sys, p, 0.0), std::invalid_argument);
  IntegratorParams ip;
  ip.allow_backward = true;
  const auto traj = integrate(sys, p, 0.0, ip);
  EXPECT_EQ(traj.direction(), -1);
  EXPECT_NEAR(traj.back().x()[0], std::cos(1.0), 1e-10);
  EXPECT_NEAR(traj.back().x()[1], std::sin(1.0), 1e-10);
}

TEST(Integrate, RegionExit) {
  // velocity (0, x1^2, 0); x2 passes 10 near t = 10/9.
  const NambuSystem sys({parse("x3"), parse("x1^3/3")});
  try {
    integrate(sys, ExtendedPoint({3.0, 0.0, 0.0}, 0.0), 5.0);
    FAIL();
  } catch (const FlowError& e) {
    EXPECT_EQ(e.kind(), FlowError::Kind::region_exit);
    EXPECT_NEAR(e.time(), 10.0 / 9.0, 2e-3);
  }
}

TEST(Integrate, MaxStepsExceeded) {
  IntegratorParams ip;
  ip.max_steps = 100;
  try {
    integrate(builtin_system("rotor"), ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 1.0, ip);
    FAIL();
  } catch (const FlowError& e) {
    EXPECT_EQ(e.kind(), FlowError::Kind::max_steps);
  }
  ip.method = Method::rk45_adaptive;
  ip.max_steps = 3;
  EXPECT_THROW(integrate(builtin_system("rotor"), ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 100.0, ip), FlowError);
}

TEST(Integrate, AdaptiveStepUnderflowAtBlowUp) {
  // x1' = x1^2 blows up at t = 1 from x1 = 1; the region is made effectively unbounded.
  const NambuSystem sys({parse("x2"), parse("x1^2*x3")}, "blowup", 1e300);
  IntegratorParams ip;
  ip.method = Method::rk45_adaptive;
  try {
    integrate(sys, ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 2.0, ip);
    FAIL();
  } catch (const FlowError& e) {
    EXPECT_TRUE(e.kind() == FlowError::Kind::step_underflow || e.kind() == FlowError::Kind::non_finite)
        << e.what();
    EXPECT_NEAR(e.time(), 1.0, 1e-3);
  }
}

TEST(Integrate, ParameterValidation) {
  IntegratorParams ip;
  ip.h = 0.0;
  EXPECT_THROW(integrate(builtin_system("rotor"), ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 1.0, ip),
               std::invalid_argument);
  ip = {};
  ip.rtol = -1.0;
  EXPECT_THROW(ip.validate(), std::invalid_argument);
}

TEST(Trajectory, HermiteInterpolationAndCsv) {
  IntegratorParams ip;
  ip.h = 1e-2;
  const auto traj = integrate(builtin_system("rotor"), ExtendedPoint({1.0, 0.0, 0.0}, 0.0), 1.0, ip);
  for (double t : {0.0, 0.123, 0.5, 0.9999, 1.0}) {
    const auto p = traj.at(t);
    EXPECT_NEAR(p.x()[0], std::cos(t), 1e-9);
    EXPECT_NEAR(p.x()[1], -std::sin(t), 1e-9);
  }
  EXPECT_THROW(traj.at(1.5), std::out_of_range);
  std::ostringstream os;
  traj.write_csv(os, 4);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "sample,t,x1,x2,x3");
  std::getline(is, line);
  EXPECT_EQ(line, "4,0,1,0,0");
}

TEST(Transport, RotorCircleIsInvariantAsSet) {
  const auto c = unit_circle(64);
  for (double t : {0.3, 1.0, 2.5}) {
    const auto moved = transport_cycle(builtin_system("rotor"), c, t);
    EXPECT_EQ(moved.time(), t);
    EXPECT_EQ(moved.sample_count(), c.sample_count());
    for (std::size_t i = 0; i < moved.sample_count(); ++i) {
      const auto pt = moved.point(i);
      const auto x = pt.x();
      const double dist = std::hypot(std::hypot(x[0], x[1]) - 1.0, x[2]);
      EXPECT_LE(dist, 1e-8);
      // sample i moves to angle theta_i - t
      const double th = 2 * kPi * i / 64 - t;
      EXPECT_NEAR(x[0], std::cos(th), 1e-8);
    }
  }
}

TEST(Transport, IdentityAtSourceTime) {
  const auto c = unit_circle(32, 0.7);
  const auto same = transport_cycle(builtin_system("euler-top"), c, 0.7);
  for (std::size_t i = 0; i < c.chain().data().size(); ++i) EXPECT_EQ(same.chain().data()[i], c.chain().data()[i]);
}

TEST(Transport, EulerTopSmallCircleStaysOnLevelSets) {
  const auto sys = builtin_system("euler-top");
  const std::vector<double> center{1.0, 0.5, 0.2};
  const auto c = Cycle::loop(3, 64, 0.0, [&](double th) {
    return std::vector<double>{center[0], center[1] + 0.05 * std::cos(th), center[2] + 0.05 * std::sin(th)};
  });
  const auto moved = transport_cycle(sys, c, 1.0);
  for (const auto& h : sys.hamiltonians()) {
    const double hc = eval(h, center);
    double spread = 0.0;
    for (std::size_t i = 0; i < c.sample_count(); ++i) spread = std::max(spread, std::abs(hval(h, c.point(i)) - hc));
    for (std::size_t i = 0; i < moved.sample_count(); ++i) {
      EXPECT_LE(std::abs(hval(h, moved.point(i)) - hc), spread + 1e-12);
      EXPECT_NEAR(hval(h, moved.point(i)), hval(h, c.point(i)), 1e-12);
    }
  }
}

TEST(Transport, CommutesWithStartIndexRotation) {
  const auto sys = builtin_system("euler-top");
  const auto f = [](double th) { return std::vector<double>{std::cos(th), 0.5 + 0.3 * std::sin(th), 0.2}; };
  const auto c = Cycle::loop(3, 16, 0.0, f);
  const int shift = 5;
  const auto c_rot = Cycle::loop(3, 16, 0.0, [&](double th) { return f(th + 2 * kPi * shift / 16); });
  const auto a = transport_cycle(sys, c, 0.8), b = transport_cycle(sys, c_rot, 0.8);
  for (int i = 0; i < 16; ++i) {
    const auto pa = a.point((i + shift) % 16), pb = b.point(i);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(pa.x()[k], pb.x()[k], 1e-14);
  }
}

TEST(Transport, ErrorsCarrySampleIndex) {
  const NambuSystem sys({parse("x3"), parse("x1^3/3")});
  const auto c = Cycle::loop(3, 16, 0.0, [](double th) { return std::vector<double>{std::cos(th) * 3.0, 0.0, 0.0}; });
  try {
    transport_cycle(sys, c, 2.0);
    FAIL();
  } catch (const FlowError& e) {
    // Samples with 18 cos^2 theta > 10 leave the region; the lowest index is 0.
    EXPECT_EQ(e.sample_index(), 0);
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos);
  }
}

TEST(Transport, StretchWarning) {
  const auto sys = builtin_system("linear-shear");
  const auto c = Cycle::loop(3, 32, 0.0, [](double th) {
    return std::vector<double>{0.1 * std::cos(th), 0.1 * std::sin(th), 0.0};
  });
  TransportReport calm, stretched;
  transport_cycle(sys, c, 1.0, {}, &calm);
  transport_cycle(sys, c, 20.0, {}, &stretched);
  EXPECT_FALSE(calm.refinement_warning);
  EXPECT_TRUE(stretched.refinement_warning);
  EXPECT_GT(stretched.max_stretch, 10.0);
}

TEST(Surface, RotorSurfaceStaysInPlane) {
  const auto sys = builtin_system("rotor");
  const auto surf = build_solution_surface(sys, unit_circle(64), 1.0, 33);
  EXPECT_EQ(surf.time_count(), 33u);
  const auto& ch = surf.chain();
  for (std::size_t f = 0; f < ch.sample_count(); ++f) EXPECT_LE(std::abs(ch.sample(f)[2]), 1e-10);
}

TEST(Surface, DegenerateCycleReplicatesTrajectory) {
  const auto sys = builtin_system("euler-top");
  const auto c = Cycle::loop(3, 8, 0.0, [](double) { return std::vector<double>{0.3, 0.4, 0.5}; });
  const auto surf = build_solution_surface(sys, c, 1.0, 5);
  for (std::size_t j = 0; j < 5; ++j) {
    const auto col = surf.column(j);
    for (std::size_t i = 1; i < 8; ++i)
      for (int k = 0; k < 4; ++k) EXPECT_EQ(col.chain().sample(i)[k], col.chain().sample(0)[k]);
  }
  const auto traj = integrate(sys, ExtendedPoint({0.3, 0.4, 0.5}, 0.0), 1.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(surf.final_cycle().point(3).x()[k], traj.back().x()[k], 1e-12);
}

TEST(Surface, BoundaryIsSourceMinusTransported) {
  const auto sys = builtin_system("euler-top");
  const auto c1 = Cycle::loop(3, 16, 0.0, [](double th) {
    return std::vector<double>{1.0, 0.5 + 0.1 * std::cos(th), 0.2 + 0.1 * std::sin(th)};
  });
  const auto surf = build_solution_surface(sys, c1, 2.0, 9);
  const auto faces = boundary(surf.chain());
  ASSERT_EQ(faces.size(), 2u);
  EXPECT_EQ(faces[0].sign, 1);
  EXPECT_EQ(faces[1].sign, -1);
  const auto c2 = transport_cycle(sys, c1, 2.0);
  for (std::size_t i = 0; i < c1.chain().data().size(); ++i) {
    EXPECT_EQ(faces[0].face.data()[i], c1.chain().data()[i]);
    EXPECT_NEAR(faces[1].face.data()[i], c2.chain().data()[i], 1e-12);
  }
}

TEST(Surface, ColumnsAreFlowImages) {
  const auto sys = builtin_system("nambu4-demo");
  const auto c1 = Cycle::loop(4, 16, 0.0, [](double th) {
    return std::vector<double>{std::cos(th), 0.2, 0.5 * std::sin(th), 0.3};
  });
  const auto surf = build_solution_surface(sys, c1, 1.0, 5);
  for (std::size_t j = 0; j < 5; ++j) {
    const auto expected = transport_cycle(sys, c1, surf.times()[j]);
    const auto col = surf.column(j);
    for (std::size_t i = 0; i < expected.chain().data().size(); ++i)
      EXPECT_NEAR(col.chain().data()[i], expected.chain().data()[i], 1e-12);
  }
}

TEST(Surface, SigmaHatVanishesOnRotorSurface) {
  // Both terms of sigma_hat carry dx3 = dH2, which pulls back to zero on the x3 = 0 surface.
  const auto sys = builtin_system("rotor");
  const auto surf = build_solution_surface(sys, unit_circle(256), 1.0, 33);
  const auto r = integrate_over_chain(sigma_hat(sys), surf.chain());
  EXPECT_NEAR(r.value, 0.0, 1e-9);
}

TEST(Surface, PreconditionsAndCsv) {
  const auto sys = builtin_system("rotor");
  EXPECT_THROW(build_solution_surface(sys, unit_circle(8), 0.0, 5), std::invalid_argument);
  EXPECT_THROW(build_solution_surface(sys, unit_circle(8), 1.0, 1), std::invalid_argument);
  const auto surf = build_solution_surface(sys, unit_circle(8), 1.0, 2);
  std::ostringstream os;
  surf.write_csv(os);
  int lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 1 + 16);
}
