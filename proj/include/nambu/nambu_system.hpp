#pragma once

// Nambu systems on n-dimensional phase space with n - 1 Hamiltonians.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nambu/exterior.hpp"
#include "nambu/expr.hpp"

namespace nambu {

inline constexpr double kDefaultRegionHalfWidth = 10.0;

class NambuSystem {
 public:
  NambuSystem(std::vector<Expr> hamiltonians, std::string label = "custom",
              double region_half_width = kDefaultRegionHalfWidth)
      : hamiltonians_(std::move(hamiltonians)), label_(std::move(label)), region_half_width_(region_half_width) {
    const int n = dim();
    if (n < 3 || n > kMaxSpatialSlots)
      throw std::invalid_argument("nambu system: need 2..5 hamiltonians (dimension 3..6), got " +
                                  std::to_string(hamiltonians_.size()));
    for (std::size_t k = 0; k < hamiltonians_.size(); ++k)
      if (hamiltonians_[k].max_slot() >= n)
        throw std::invalid_argument("nambu system: H" + std::to_string(k + 1) + " references x" +
                                    std::to_string(hamiltonians_[k].max_slot() + 1) + " in dimension " +
                                    std::to_string(n));
    if (!(region_half_width_ > 0.0)) throw std::invalid_argument("nambu system: region half-width must be positive");
  }

  /// Phase-space dimension n; exactly n - 1 Hamiltonians.
  int dim() const { return static_cast<int>(hamiltonians_.size()) + 1; }
  int ncoords() const { return dim() + 1; }
  const std::vector<Expr>& hamiltonians() const { return hamiltonians_; }
  const std::string& label() const { return label_; }
  double region_half_width() const { return region_half_width_; }

 private:
  std::vector<Expr> hamiltonians_;
  std::string label_;
  double region_half_width_;
};

namespace detail {

struct SignedPermutation {
  std::vector<int> perm;
  int sign;
};

/// All permutations of 0..n-1 with their parity signs.
inline const std::vector<SignedPermutation>& permutations(int n) {
  static std::array<std::once_flag, kMaxSpatialSlots + 1> flags;
  static std::array<std::vector<SignedPermutation>, kMaxSpatialSlots + 1> cache;
  std::call_once(flags[n], [n] {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    do {
      int inversions = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (p[i] > p[j]) ++inversions;
      cache[n].push_back({p, (inversions % 2) ? -1 : 1});
    } while (std::next_permutation(p.begin(), p.end()));
  });
  return cache[n];
}

/// v_i = eps_{i j1 ... j_{n-1}} g1_{j1} ... g_{n-1, j_{n-1}}.
template <class S>
std::vector<S> levi_civita_contract(const std::vector<std::vector<S>>& grads, int n) {
  std::vector<S> v(n, S(0.0));
  for (const auto& sp : permutations(n)) {
    S term(static_cast<double>(sp.sign));
    for (int k = 0; k + 1 < n; ++k) term = term * grads[k][sp.perm[k + 1]];
    v[sp.perm[0]] += term;
  }
  return v;
}

}  // namespace detail

/// Spatial velocity grad H1 x ... x grad H_{n-1} at p (time component 1).
inline TangentVector velocity(const NambuSystem& sys, const ExtendedPoint& p) {
  const int n = sys.dim();
  if (p.dim() != n) throw std::invalid_argument("velocity: point dimension mismatch");
  std::vector<std::vector<double>> grads;
  for (const auto& h : sys.hamiltonians()) {
    auto g = gradient(h, p.x(), p.t());
    g.pop_back();
    grads.push_back(std::move(g));
  }
  return TangentVector(detail::levi_civita_contract(grads, n), 1.0);
}

/// The dynamical field Gamma = velocity + d/dt as an analytic vector field.
inline VectorField dynamical_field(const NambuSystem& sys) {
  const int n = sys.dim();
  return VectorField::analytic(n + 1, [sys, n](std::span<const double> coords, int order, std::span<Jet> out) {
    const auto jets = detail::seed_jets(coords, order + 1);
    std::vector<std::vector<Jet>> grads;
    for (const auto& h : sys.hamiltonians()) {
      const Jet value = detail::eval_on_coords(h, jets);
      std::vector<Jet> g;
      for (int i = 0; i < n; ++i) g.push_back(value.derivative(i));
      grads.push_back(std::move(g));
    }
    auto v = detail::levi_civita_contract(grads, n);
    for (int i = 0; i < n; ++i) out[i] = v[i];
    out[n] = Jet(1.0);
  });
}

/// x1 dx2 ^ ... ^ dxn + H1 dt ^ dH2 ^ ... ^ dH_{n-1}, which for n = 3 is
/// x1 dx2 ^ dx3 - H1 dH2 ^ dt. Written with dt last the Hamiltonian part
/// carries the sign (-1)^n, so that i_Gamma d sigma_hat = 0 in every dimension.
inline DifferentialForm sigma_hat(const NambuSystem& sys) {
  const int n = sys.dim(), nc = n + 1;
  std::vector<int> volume_indices;
  for (int i = 1; i < n; ++i) volume_indices.push_back(i);
  DifferentialForm volume_part =
      DifferentialForm::from_terms(nc, n - 1, {{parse("x1"), volume_indices}});
  const auto& hs = sys.hamiltonians();
  DifferentialForm ham_part = DifferentialForm::scalar(nc, hs[0]);
  for (std::size_t k = 1; k < hs.size(); ++k)
    ham_part = wedge(ham_part, exterior_derivative(DifferentialForm::scalar(nc, hs[k])));
  ham_part = wedge(ham_part, DifferentialForm::differential(nc, n));
  return (n % 2 == 1) ? volume_part - ham_part : volume_part + ham_part;
}

struct DynamicsResidual {
  double max_residual = 0.0;
  /// Sorted coordinate indices of the worst basis (n-1)-tuple.
  std::vector<int> worst_basis;
};

/// max |(i_v d sigma_hat)(e_I)| over basis (n-1)-tuples for a given v.
inline DynamicsResidual dynamics_residual(const NambuSystem& sys, const ExtendedPoint& p, const TangentVector& v) {
  const DifferentialForm dsigma = exterior_derivative(sigma_hat(sys));
  const DifferentialForm contracted = interior(VectorField::constant(v), dsigma);
  const auto coeffs = contracted.coefficients(p.coords());
  DynamicsResidual r;
  for (int b = 0; b < contracted.size(); ++b) {
    if (std::abs(coeffs[b]) >= r.max_residual) {
      r.max_residual = std::abs(coeffs[b]);
      r.worst_basis = contracted.basis().indices(b);
    }
  }
  return r;
}

/// Residual of i_{gamma-dot} d sigma_hat = 0 with gamma-dot from velocity().
inline DynamicsResidual verify_dynamics(const NambuSystem& sys, const ExtendedPoint& p) {
  return dynamics_residual(sys, p, velocity(sys, p));
}

/// Central-difference divergence of a spatial field at p with step
/// 1e-5 max(1, |x_i|).
template <class Field>
double spatial_divergence(const Field& field, const ExtendedPoint& p) {
  const int n = p.dim();
  double div = 0.0;
  std::vector<double> x(p.x().begin(), p.x().end());
  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = field(ExtendedPoint(x, p.t()))[i];
    x[i] = xi - h;
    const double fm = field(ExtendedPoint(x, p.t()))[i];
    x[i] = xi;
    div += (fp - fm) / (2.0 * h);
  }
  return div;
}

inline double liouville_divergence(const NambuSystem& sys, const ExtendedPoint& p) {
  return spatial_divergence(
      [&sys](const ExtendedPoint& q) {
        const TangentVector v = velocity(sys, q);
        return std::vector<double>(v.spatial().begin(), v.spatial().end());
      },
      p);
}

// ---------------------------------------------------------------------------
// Built-in systems
// ---------------------------------------------------------------------------

using SystemParams = std::map<std::string, double>;

namespace detail {

inline double param(const SystemParams& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline void reject_unknown(const SystemParams& params, std::initializer_list<const char*> allowed,
                           std::string_view system) {
  for (const auto& [k, v] : params) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument("system '" + std::string(system) + "': unknown parameter '" + k + "'");
  }
}

}  // namespace detail

inline const std::vector<std::string>& builtin_system_names() {
  static const std::vector<std::string> names{"euler-top", "rotor", "linear-shear", "nambu4-demo"};
  return names;
}

/// euler-top(I1, I2, I3): H1 = (x1^2/I1 + x2^2/I2 + x3^2/I3)/2, H2 = |x|^2/2.
/// rotor: H1 = |x|^2/2, H2 = x3.
/// linear-shear(rate): H1 = rate x2^2/2, H2 = x3, giving dx1/dt = rate x2.
/// nambu4-demo: n = 4 with H1 = (x1^2+x2^2)/2, H2 = (x3^2+x4^2)/2, H3 = x1 x3 + x2 x4.
inline NambuSystem builtin_system(std::string_view name, const SystemParams& params = {}) {
  const auto num = [](double v) { return detail::format_number(v); };
  if (name == "euler-top") {
    detail::reject_unknown(params, {"I1", "I2", "I3"}, name);
    const double i1 = detail::param(params, "I1", 1.0), i2 = detail::param(params, "I2", 2.0),
                 i3 = detail::param(params, "I3", 3.0);
    if (!(i1 > 0 && i2 > 0 && i3 > 0)) throw std::invalid_argument("euler-top: moments of inertia must be positive");
    return NambuSystem({parse("(x1^2/" + num(i1) + " + x2^2/" + num(i2) + " + x3^2/" + num(i3) + ")/2"),
                        parse("(x1^2 + x2^2 + x3^2)/2")},
                       "euler-top");
  }
  if (name == "rotor") {
    detail::reject_unknown(params, {}, name);
    return NambuSystem({parse("(x1^2 + x2^2 + x3^2)/2"), parse("x3")}, "rotor");
  }
  if (name == "linear-shear") {
    detail::reject_unknown(params, {"rate"}, name);
    const double rate = detail::param(params, "rate", 1.0);
    return NambuSystem({parse(num(rate) + "*x2^2/2"), parse("x3")}, "linear-shear");
  }
  if (name == "nambu4-demo") {
    detail::reject_unknown(params, {}, name);
    return NambuSystem({parse("(x1^2 + x2^2)/2"), parse("(x3^2 + x4^2)/2"), parse("x1*x3 + x2*x4")}, "nambu4-demo");
  }
  throw std::invalid_argument("unknown built-in system '" + std::string(name) + "'");
}

}  // namespace nambu
