#pragma once

// Discretized chains and cycles in extended phase space, and quadrature of
// forms over them.
//
// A p-chain is a tensor grid of samples over p parameter axes. Periodic
// axes cover [lo, hi) without a duplicated seam sample; bounded axes
// include both end points. Tangents come from spectral differentiation on
// periodic axes and fourth-order finite differences on bounded axes; the
// quadrature is the periodic trapezoid rule on periodic axes and the
// composite trapezoid rule with fourth-order Gregory end corrections on
// bounded ones (plain trapezoid below six samples).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "nambu/exterior.hpp"
#include "nambu/parallel.hpp"

namespace nambu {

inline constexpr int kMinPeriodicSamples = 8;

struct GridAxis {
  int count = 0;
  bool periodic = true;
  double lo = 0.0;
  double hi = 2.0 * std::numbers::pi;
  std::string name;

  static GridAxis periodic_axis(int count, std::string name = "theta") {
    return {count, true, 0.0, 2.0 * std::numbers::pi, std::move(name)};
  }
  static GridAxis bounded(int count, double lo, double hi, std::string name = "s") {
    return {count, false, lo, hi, std::move(name)};
  }

  double step() const {
    if (periodic) return (hi - lo) / count;
    return count > 1 ? (hi - lo) / (count - 1) : 0.0;
  }
  double param(int i) const { return lo + i * step(); }
};

class Chain {
 public:
  Chain(int ncoords, std::vector<GridAxis> axes, std::vector<double> data, int orientation = 1,
        bool boundary_known = true)
      : ncoords_(ncoords),
        axes_(std::move(axes)),
        data_(std::move(data)),
        orientation_(orientation),
        boundary_known_(boundary_known) {
    if (ncoords < 3 || ncoords > kMaxCoords) throw std::invalid_argument("chain: ncoords must be in [3, 7]");
    if (orientation != 1 && orientation != -1) throw std::invalid_argument("chain: orientation must be +1 or -1");
    std::size_t count = 1;
    for (const auto& a : axes_) {
      if (a.count < 1) throw std::invalid_argument("chain: axis '" + a.name + "' has no samples");
      count *= static_cast<std::size_t>(a.count);
    }
    if (data_.size() != count * static_cast<std::size_t>(ncoords))
      throw std::invalid_argument("chain: data size does not match the grid");
  }

  int ncoords() const { return ncoords_; }
  int p() const { return static_cast<int>(axes_.size()); }
  const std::vector<GridAxis>& axes() const { return axes_; }
  int orientation() const { return orientation_; }
  bool boundary_known() const { return boundary_known_; }
  std::size_t sample_count() const { return data_.size() / ncoords_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> sample(std::size_t flat) const { return {data_.data() + flat * ncoords_, std::size_t(ncoords_)}; }
  ExtendedPoint point(std::size_t flat) const { return ExtendedPoint::from_coords(sample(flat)); }

  /// Row-major strides in samples; axis 0 varies slowest.
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(axes_.size(), 1);
    for (int a = p() - 2; a >= 0; --a) s[a] = s[a + 1] * axes_[a + 1].count;
    return s;
  }

  std::size_t flat_index(std::span<const int> idx) const {
    const auto s = strides();
    std::size_t f = 0;
    for (int a = 0; a < p(); ++a) f += s[a] * idx[a];
    return f;
  }

  Chain reversed() const { return Chain(ncoords_, axes_, data_, -orientation_, boundary_known_); }
  Chain with_data(std::vector<double> data) const {
    return Chain(ncoords_, axes_, std::move(data), orientation_, boundary_known_);
  }

 private:
  int ncoords_;
  std::vector<GridAxis> axes_;
  std::vector<double> data_;
  int orientation_;
  bool boundary_known_;
};

/// A chain whose axes are all periodic and whose samples share one time.
class Cycle {
 public:
  explicit Cycle(Chain chain) : chain_(std::move(chain)) {
    if (chain_.p() < 1) throw std::invalid_argument("cycle: needs at least one axis");
    for (const auto& a : chain_.axes())
      if (!a.periodic) throw std::invalid_argument("cycle: axis '" + a.name + "' is not periodic");
    const int tcol = chain_.ncoords() - 1;
    time_ = chain_.sample(0)[tcol];
    for (std::size_t i = 1; i < chain_.sample_count(); ++i)
      if (chain_.sample(i)[tcol] != time_) throw std::invalid_argument("cycle: samples do not share one time");
  }

  /// Samples given as n spatial coordinates each, all placed at `time`.
  static Cycle from_samples(int n, std::vector<int> counts, std::span<const double> spatial, double time) {
    std::vector<GridAxis> axes;
    const char* names[] = {"theta", "phi", "psi", "chi", "omega"};
    for (std::size_t a = 0; a < counts.size(); ++a) axes.push_back(GridAxis::periodic_axis(counts[a], names[a % 5]));
    std::size_t count = 1;
    for (int c : counts) count *= c;
    if (spatial.size() != count * n) throw std::invalid_argument("cycle: sample array size mismatch");
    std::vector<double> data;
    data.reserve(count * (n + 1));
    for (std::size_t i = 0; i < count; ++i) {
      data.insert(data.end(), spatial.begin() + i * n, spatial.begin() + (i + 1) * n);
      data.push_back(time);
    }
    return Cycle(Chain(n + 1, std::move(axes), std::move(data)));
  }

  /// Loop theta -> x(theta) sampled at theta_j = 2 pi j / count.
  static Cycle loop(int n, int count, double time, const std::function<std::vector<double>(double)>& x) {
    std::vector<double> spatial;
    for (int j = 0; j < count; ++j) {
      const auto xj = x(2.0 * std::numbers::pi * j / count);
      if (static_cast<int>(xj.size()) != n) throw std::invalid_argument("cycle: loop returned wrong dimension");
      spatial.insert(spatial.end(), xj.begin(), xj.end());
    }
    return from_samples(n, {count}, spatial, time);
  }

  const Chain& chain() const { return chain_; }
  int p() const { return chain_.p(); }
  int dim() const { return chain_.ncoords() - 1; }
  double time() const { return time_; }
  std::size_t sample_count() const { return chain_.sample_count(); }
  ExtendedPoint point(std::size_t i) const { return chain_.point(i); }
  Cycle reversed() const { return Cycle(chain_.reversed()); }
  Cycle with_data(std::vector<double> data) const { return Cycle(chain_.with_data(std::move(data))); }

 private:
  Chain chain_;
  double time_ = 0.0;
};

/// Chain (or cycle) given by parameter expressions. Each coordinate
/// expression uses the axis names as variables; `time` fills the t column.
inline Chain parametric_chain(std::vector<GridAxis> axes, const std::vector<std::string>& coordinate_exprs,
                              double time, int orientation = 1) {
  std::vector<std::string> names;
  for (const auto& a : axes) names.push_back(a.name);
  const VariableScheme scheme = VariableScheme::parameters(names);
  std::vector<Expr> exprs;
  for (const auto& s : coordinate_exprs) exprs.push_back(parse(s, scheme));
  const int n = static_cast<int>(exprs.size());
  const int ncoords = n + 1;
  std::vector<int> idx(axes.size(), 0);
  std::size_t count = 1;
  for (const auto& a : axes) count *= a.count;
  std::vector<double> data;
  data.reserve(count * ncoords);
  std::vector<double> params(axes.size());
  for (std::size_t f = 0; f < count; ++f) {
    std::size_t rem = f;
    for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % axes[a].count);
      rem /= axes[a].count;
    }
    for (std::size_t a = 0; a < axes.size(); ++a) params[a] = axes[a].param(idx[a]);
    for (const auto& e : exprs) data.push_back(eval(e, params));
    data.push_back(time);
  }
  return Chain(ncoords, std::move(axes), std::move(data), orientation);
}

struct QuadratureResult {
  double value = 0.0;
  double estimate = 0.0;
};

namespace detail {

/// Visits every 1-d line of the grid along `axis`, passing the flat sample
/// index of its first element.
inline void for_each_line(const Chain& c, int axis, const std::function<void(std::size_t)>& f) {
  const auto strides = c.strides();
  const std::size_t total = c.sample_count();
  const std::size_t len = c.axes()[axis].count;
  for (std::size_t start = 0; start < total; ++start) {
    if ((start / strides[axis]) % len != 0) continue;
    f(start);
  }
}

inline void spectral_derivative_line(std::vector<std::complex<double>>& buf, double scale) {
  static thread_local Eigen::FFT<double> fft;
  const int n = static_cast<int>(buf.size());
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, buf);
  for (int k = 0; k < n; ++k) {
    int wave = k <= n / 2 ? k : k - n;
    if (n % 2 == 0 && k == n / 2) wave = 0;
    freq[k] *= std::complex<double>(0.0, wave * scale);
  }
  fft.inv(buf, freq);
}

inline void fd_derivative_line(std::span<const double> f, double h, std::span<double> out) {
  const int m = static_cast<int>(f.size());
  if (m == 1 || h == 0.0) {
    for (double& o : out) o = 0.0;
    return;
  }
  if (m == 2) {
    out[0] = out[1] = (f[1] - f[0]) / h;
    return;
  }
  if (m < 5) {
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    for (int i = 1; i + 1 < m; ++i) out[i] = (f[i + 1] - f[i - 1]) / (2 * h);
    out[m - 1] = (3 * f[m - 1] - 4 * f[m - 2] + f[m - 3]) / (2 * h);
    return;
  }
  const double d = 12.0 * h;
  out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / d;
  out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / d;
  for (int i = 2; i + 2 < m; ++i) out[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / d;
  out[m - 2] = (3 * f[m - 1] + 10 * f[m - 2] - 18 * f[m - 3] + 6 * f[m - 4] - f[m - 5]) / d;
  out[m - 1] = (25 * f[m - 1] - 48 * f[m - 2] + 36 * f[m - 3] - 16 * f[m - 4] + 3 * f[m - 5]) / d;
}

}  // namespace detail

/// d(sample)/d(parameter) along one axis, laid out like the chain data.
inline std::vector<double> axis_tangents(const Chain& c, int axis) {
  const int nc = c.ncoords();
  const GridAxis& ax = c.axes()[axis];
  const std::size_t stride = c.strides()[axis];
  const auto data = c.data();
  std::vector<double> out(data.size(), 0.0);
  detail::for_each_line(c, axis, [&](std::size_t start) {
    const int len = ax.count;
    if (ax.periodic) {
      std::vector<std::complex<double>> buf(len);
      const double scale = 2.0 * std::numbers::pi / (ax.hi - ax.lo);
      for (int comp = 0; comp < nc; ++comp) {
        for (int j = 0; j < len; ++j) buf[j] = data[(start + j * stride) * nc + comp];
        detail::spectral_derivative_line(buf, scale);
        for (int j = 0; j < len; ++j) out[(start + j * stride) * nc + comp] = buf[j].real();
      }
    } else {
      std::vector<double> f(len), d(len);
      for (int comp = 0; comp < nc; ++comp) {
        for (int j = 0; j < len; ++j) f[j] = data[(start + j * stride) * nc + comp];
        detail::fd_derivative_line(f, ax.step(), d);
        for (int j = 0; j < len; ++j) out[(start + j * stride) * nc + comp] = d[j];
      }
    }
  });
  return out;
}

namespace detail {

inline constexpr int kGregoryMinSamples = 6;

inline std::vector<double> axis_weights(const GridAxis& ax) {
  const double h = ax.step();
  std::vector<double> w(ax.count, h);
  if (ax.periodic) return w;
  const int m = ax.count;
  if (m == 1) {
    w[0] = 0.0;
  } else if (m < kGregoryMinSamples) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  } else {
    const double ends[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
    for (int i = 0; i < 3; ++i) {
      w[i] = ends[i] * h;
      w[m - 1 - i] = ends[i] * h;
    }
  }
  return w;
}

inline double quadrature(const DifferentialForm& alpha, const Chain& c) {
  const int p = c.p(), nc = c.ncoords();
  const std::size_t count = c.sample_count();
  if (p == 0) {
    return c.orientation() * alpha.coefficients(c.sample(0))[0];
  }
  std::vector<std::vector<double>> tangents;
  for (int a = 0; a < p; ++a) tangents.push_back(axis_tangents(c, a));
  std::vector<std::vector<double>> weights;
  for (const auto& ax : c.axes()) weights.push_back(axis_weights(ax));
  const auto strides = c.strides();

  std::vector<double> contributions(count, 0.0);
  parallel_for(count, [&](std::size_t f) {
    double w = 1.0;
    for (int a = 0; a < p; ++a) w *= weights[a][(f / strides[a]) % c.axes()[a].count];
    if (w == 0.0) return;
    std::vector<std::span<const double>> vecs;
    for (int a = 0; a < p; ++a) vecs.emplace_back(tangents[a].data() + f * nc, nc);
    const auto coeffs = alpha.coefficients(c.sample(f));
    contributions[f] = w * contract(alpha.basis(), coeffs, vecs);
  });
  double total = 0.0;
  for (double v : contributions) total += v;
  return c.orientation() * total;
}

/// Every other sample on each axis that can be halved. `changed` is false
/// when no axis could be halved; `bounded_order` is the lowest quadrature
/// order among halved bounded axes (0 if none).
inline Chain half_resolution(const Chain& c, bool& changed, int& bounded_order) {
  changed = false;
  bounded_order = 0;
  std::vector<GridAxis> axes = c.axes();
  std::vector<bool> halve(axes.size(), false);
  for (std::size_t a = 0; a < axes.size(); ++a) {
    auto& ax = axes[a];
    if (ax.periodic && ax.count % 2 == 0 && ax.count >= 8) {
      halve[a] = true;
      ax.count /= 2;
    } else if (!ax.periodic && ax.count % 2 == 1 && ax.count >= 5) {
      halve[a] = true;
      ax.count = (ax.count + 1) / 2;
      const int order = ax.count >= kGregoryMinSamples ? 4 : 2;
      bounded_order = bounded_order == 0 ? order : std::min(bounded_order, order);
    }
    changed = changed || halve[a];
  }
  if (!changed) return c;
  const auto old_strides = c.strides();
  std::size_t count = 1;
  for (const auto& ax : axes) count *= ax.count;
  const int nc = c.ncoords();
  std::vector<double> data;
  data.reserve(count * nc);
  std::vector<std::size_t> new_strides(axes.size(), 1);
  for (int a = static_cast<int>(axes.size()) - 2; a >= 0; --a) new_strides[a] = new_strides[a + 1] * axes[a + 1].count;
  for (std::size_t f = 0; f < count; ++f) {
    std::size_t old = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::size_t i = (f / new_strides[a]) % axes[a].count;
      old += old_strides[a] * (halve[a] ? 2 * i : i);
    }
    const auto s = c.sample(old);
    data.insert(data.end(), s.begin(), s.end());
  }
  return Chain(nc, std::move(axes), std::move(data), c.orientation(), c.boundary_known());
}

}  // namespace detail

/// Integral of a p-form over a p-chain, with a half-resolution error
/// estimate, Richardson-scaled by 1/(2^q - 1) when a bounded axis of
/// order q was halved.
inline QuadratureResult integrate_over_chain(const DifferentialForm& alpha, const Chain& c) {
  if (alpha.degree() != c.p())
    throw std::invalid_argument("integrate: form degree " + std::to_string(alpha.degree()) + " over a " +
                                std::to_string(c.p()) + "-chain");
  if (alpha.ncoords() != c.ncoords()) throw std::invalid_argument("integrate: dimension mismatch");
  for (const auto& ax : c.axes())
    if (ax.periodic && ax.count < kMinPeriodicSamples)
      throw std::invalid_argument("integrate: periodic axis '" + ax.name + "' has fewer than 8 samples");
  QuadratureResult r;
  r.value = detail::quadrature(alpha, c);
  bool changed = false;
  int order = 0;
  const Chain half = detail::half_resolution(c, changed, order);
  if (changed) {
    const double coarse = detail::quadrature(alpha, half);
    r.estimate = std::abs(r.value - coarse) / (order > 0 ? std::exp2(order) - 1.0 : 1.0);
  }
  return r;
}

inline QuadratureResult integrate_over_cycle(const DifferentialForm& alpha, const Cycle& c) {
  return integrate_over_chain(alpha, c.chain());
}

struct SignedFace {
  int sign;
  Chain face;
};

/// Oriented boundary faces: for bounded axis d (1-based), the upper face
/// enters with sign (-1)^(d+1) and the lower face with the opposite sign,
/// times the chain orientation. Periodic axes contribute nothing.
inline std::vector<SignedFace> boundary(const Chain& c) {
  if (!c.boundary_known()) throw std::invalid_argument("boundary: chain has no boundary metadata");
  std::vector<SignedFace> faces;
  const auto strides = c.strides();
  const int nc = c.ncoords();
  for (int d = 0; d < c.p(); ++d) {
    const GridAxis& ax = c.axes()[d];
    if (ax.periodic) continue;
    std::vector<GridAxis> rest;
    for (int a = 0; a < c.p(); ++a)
      if (a != d) rest.push_back(c.axes()[a]);
    const int upper_sign = ((d % 2) ? -1 : 1) * c.orientation();
    for (int which : {0, ax.count - 1}) {
      std::vector<double> data;
      for (std::size_t f = 0; f < c.sample_count(); ++f) {
        if (static_cast<int>((f / strides[d]) % ax.count) != which) continue;
        const auto s = c.sample(f);
        data.insert(data.end(), s.begin(), s.end());
      }
      const int sign = (which == 0) ? -upper_sign : upper_sign;
      faces.push_back({sign, Chain(nc, rest, std::move(data))});
    }
  }
  return faces;
}

/// Sum of signed face integrals of a (p-1)-form over the boundary.
inline QuadratureResult integrate_over_boundary(const DifferentialForm& alpha, const Chain& c) {
  QuadratureResult total;
  for (const auto& f : boundary(c)) {
    const auto r = integrate_over_chain(alpha, f.face);
    total.value += f.sign * r.value;
    total.estimate += r.estimate;
  }
  return total;
}

}  // namespace nambu
