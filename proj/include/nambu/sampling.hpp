#pragma once

// Seeded sampling of points and tangent vectors in a box of extended phase
// space. The uniform variate is built directly from the 64-bit engine output
// so that sample sets are identical across standard libraries.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "nambu/exterior.hpp"

namespace nambu {

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct SampleRegion {
  std::vector<double> lo;  // spatial lower corner
  std::vector<double> hi;  // spatial upper corner
  double t_lo = 0.0;
  double t_hi = 1.0;

  static SampleRegion cube(int n, double half_width, double t_lo = 0.0, double t_hi = 1.0) {
    return {std::vector<double>(n, -half_width), std::vector<double>(n, half_width), t_lo, t_hi};
  }

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("region: corner dimensions differ");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw std::invalid_argument("region: lo must not exceed hi");
    if (!(t_lo <= t_hi)) throw std::invalid_argument("region: t_lo must not exceed t_hi");
  }
};

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& gen, double a, double b) { return a + (b - a) * uniform01(gen); }

inline std::vector<ExtendedPoint> sample_points(const SampleRegion& region, int count, std::uint64_t seed) {
  region.validate();
  std::mt19937_64 gen(seed);
  std::vector<ExtendedPoint> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) {
    std::vector<double> x(region.dim());
    for (int i = 0; i < region.dim(); ++i) x[i] = uniform(gen, region.lo[i], region.hi[i]);
    const double t = uniform(gen, region.t_lo, region.t_hi);
    pts.emplace_back(std::move(x), t);
  }
  return pts;
}

/// Tangent vectors with components uniform in [-1, 1).
inline std::vector<TangentVector> sample_vectors(int ncoords, int count, std::mt19937_64& gen) {
  std::vector<TangentVector> vs;
  vs.reserve(count);
  std::vector<double> c(ncoords);
  for (int k = 0; k < count; ++k) {
    for (double& v : c) v = uniform(gen, -1.0, 1.0);
    vs.push_back(TangentVector::from_components(c));
  }
  return vs;
}

}  // namespace nambu
