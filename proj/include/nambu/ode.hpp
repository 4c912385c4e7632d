#pragma once

// Explicit Runge-Kutta steppers on flat state vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace nambu::ode {

/// dy/ds = f(s, y).
using Rhs = std::function<void(double s, std::span<const double> y, std::span<double> dy)>;

/// Classical fourth-order step, in place.
inline void rk4_step(const Rhs& f, double s, std::span<double> y, double h) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  f(s, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  f(s + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  f(s + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  f(s + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

/// Dormand-Prince 5(4) coefficients.
struct DormandPrince {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr std::array<double, 7> b5{35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
  static constexpr std::array<double, 7> b4{5179.0 / 57600,    0.0,          7571.0 / 16695, 393.0 / 640,
                                            -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
};

/// One Dormand-Prince trial step. Writes the 5th-order solution to y_out and
/// returns the scaled RMS error norm (accept when <= 1).
inline double dopri5_trial(const Rhs& f, double s, std::span<const double> y, double h, std::span<double> y_out,
                           double rtol, double atol) {
  using DP = DormandPrince;
  const std::size_t n = y.size();
  std::array<std::vector<double>, 7> k;
  std::vector<double> tmp(n);
  for (int stage = 0; stage < 7; ++stage) {
    k[stage].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = y[i];
      for (int j = 0; j < stage; ++j) acc += h * DP::a[stage][j] * k[j][i];
      tmp[i] = acc;
    }
    f(s + DP::c[stage] * h, tmp, k[stage]);
  }
  double err2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double y5 = y[i], y4 = y[i];
    for (int j = 0; j < 7; ++j) {
      y5 += h * DP::b5[j] * k[j][i];
      y4 += h * DP::b4[j] * k[j][i];
    }
    y_out[i] = y5;
    const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5));
    const double e = (y5 - y4) / scale;
    err2 += e * e;
  }
  return n ? std::sqrt(err2 / static_cast<double>(n)) : 0.0;
}

}  // namespace nambu::ode
