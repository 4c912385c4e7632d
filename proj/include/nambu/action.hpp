#pragma once

// Surface action of a family of Nambu trajectories, the line action of a
// Hamiltonian trajectory, and numerical first variations of both.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nambu/chain.hpp"
#include "nambu/exterior.hpp"
#include "nambu/flow.hpp"
#include "nambu/hamiltonian.hpp"
#include "nambu/nambu_system.hpp"

namespace nambu {

/// Variation field W with zero time component. `clamped[i]` marks spatial
/// components required to vanish on the boundary of the varied object.
class VariationField {
 public:
  VariationField(VectorField w, std::vector<bool> clamped) : w_(std::move(w)), clamped_(std::move(clamped)) {
    if (static_cast<int>(clamped_.size()) != w_.ncoords() - 1)
      throw std::invalid_argument("variation field: clamp mask must have one entry per spatial coordinate");
  }

  /// Spatial component expressions; the time component is fixed to 0.
  static VariationField from_exprs(const std::vector<std::string>& spatial, std::vector<bool> clamped = {},
                                   const VariableScheme& scheme = VariableScheme::phase_space()) {
    std::vector<Expr> comps;
    for (const auto& s : spatial) comps.push_back(parse(s, scheme));
    comps.push_back(Expr::constant(0.0));
    if (clamped.empty()) clamped.assign(spatial.size(), false);
    return VariationField(VectorField::from_exprs(std::move(comps)), std::move(clamped));
  }

  const VectorField& field() const { return w_; }
  const std::vector<bool>& clamped() const { return clamped_; }
  int ncoords() const { return w_.ncoords(); }

  /// W at a point, with the time component checked to be zero.
  std::vector<double> at(std::span<const double> coords) const {
    auto v = w_.components(coords);
    if (v.back() != 0.0) throw std::invalid_argument("variation field: time component must vanish");
    return v;
  }

 private:
  VectorField w_;
  std::vector<bool> clamped_;
};

struct ActionReport {
  double action = 0.0;
  double action_estimate = 0.0;
  std::vector<double> epsilons;
  std::vector<double> deltas;
  /// Least-squares slope of log|dS| against log eps; NaN when every dS is 0.
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool all_zero = false;
  std::optional<double> boundary_prediction;
  /// dS / eps at the smallest eps.
  double first_variation = 0.0;
  /// max |W_i| over clamped components on the boundary.
  double clamp_violation = 0.0;

  /// |dS/eps - prediction| / |prediction| at the smallest eps.
  double relative_mismatch() const {
    if (!boundary_prediction) return std::numeric_limits<double>::quiet_NaN();
    return std::abs(first_variation - *boundary_prediction) / std::abs(*boundary_prediction);
  }

  void write_csv(std::ostream& os) const {
    os << "epsilon,delta_s\n";
    for (std::size_t k = 0; k < epsilons.size(); ++k)
      os << detail::format_number(epsilons[k]) << ',' << detail::format_number(deltas[k]) << '\n';
  }
};

namespace detail {

inline void check_epsilons(const std::vector<double>& eps) {
  if (eps.size() < 3) throw std::invalid_argument("variation: need at least 3 epsilons");
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!(eps[k] > 0.0)) throw std::invalid_argument("variation: epsilons must be positive");
    if (k > 0 && !(eps[k] < eps[k - 1])) throw std::invalid_argument("variation: epsilons must strictly decrease");
  }
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (y[k] == 0.0) continue;
    const double lx = std::log(x[k]), ly = std::log(std::abs(y[k]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Moves every sample by one explicit Euler step eps W.
inline Chain displace(const Chain& c, const VariationField& w, double eps, double region_half_width) {
  const int nc = c.ncoords();
  std::vector<double> data(c.data().begin(), c.data().end());
  for (std::size_t f = 0; f < c.sample_count(); ++f) {
    const auto v = w.at(c.sample(f));
    for (int i = 0; i + 1 < nc; ++i) {
      double& x = data[f * nc + i];
      x += eps * v[i];
      if (!(std::abs(x) <= region_half_width))
        throw FlowError(FlowError::Kind::region_exit, c.sample(f)[nc - 1],
                        "displaced sample " + std::to_string(f) + " leaves the region");
    }
  }
  return c.with_data(std::move(data));
}

inline void fill_variations(ActionReport& r, const DifferentialForm& form, const Chain& base, const VariationField& w,
                            const std::vector<double>& epsilons, double region) {
  check_epsilons(epsilons);
  r.epsilons = epsilons;
  bool all_zero = true;
  for (double eps : epsilons) {
    const double s = integrate_over_chain(form, displace(base, w, eps, region)).value;
    r.deltas.push_back(s - r.action);
    all_zero = all_zero && r.deltas.back() == 0.0;
  }
  r.all_zero = all_zero;
  r.slope = loglog_slope(r.epsilons, r.deltas);
  r.first_variation = r.deltas.back() / r.epsilons.back();
}

}  // namespace detail

/// Integral of sigma_hat over an (n-1)-chain.
inline QuadratureResult takhtajan_action(const NambuSystem& sys, const Chain& surface) {
  if (surface.p() != sys.dim() - 1) throw std::invalid_argument("action: chain dimension must be n - 1");
  if (surface.ncoords() != sys.ncoords()) throw std::invalid_argument("action: dimension mismatch");
  return integrate_over_chain(sigma_hat(sys), surface);
}

inline QuadratureResult takhtajan_action(const NambuSystem& sys, const SolutionSurface& surface) {
  return takhtajan_action(sys, surface.chain());
}

/// (integral over c1 - integral over c2) of x1 (W2 dx3 - W3 dx2), n = 3.
inline double boundary_term(const NambuSystem& sys, const SolutionSurface& surface, const VariationField& w) {
  if (sys.dim() != 3) throw std::invalid_argument("boundary term: defined for n = 3 only");
  const int nc = sys.ncoords();
  const auto area23 = wedge(DifferentialForm::differential(nc, 1), DifferentialForm::differential(nc, 2));
  const auto form = wedge(DifferentialForm::scalar(nc, parse("x1")), interior(w.field(), area23));
  return integrate_over_cycle(form, surface.source()).value - integrate_over_cycle(form, surface.final_cycle()).value;
}

namespace detail {

inline double clamp_violation(const VariationField& w, const std::vector<Chain>& boundary_pieces) {
  double m = 0.0;
  for (const auto& piece : boundary_pieces)
    for (std::size_t f = 0; f < piece.sample_count(); ++f) {
      const auto v = w.at(piece.sample(f));
      for (std::size_t i = 0; i < w.clamped().size(); ++i)
        if (w.clamped()[i]) m = std::max(m, std::abs(v[i]));
    }
  return m;
}

}  // namespace detail

/// S(eps) - S for surfaces displaced by eps W, with a log-log slope fit and,
/// for n = 3, the predicted first-order coefficient.
inline ActionReport vary_action(const NambuSystem& sys, const SolutionSurface& surface, const VariationField& w,
                                const std::vector<double>& epsilons) {
  if (w.ncoords() != sys.ncoords()) throw std::invalid_argument("variation: dimension mismatch");
  ActionReport r;
  const auto base = takhtajan_action(sys, surface);
  r.action = base.value;
  r.action_estimate = base.estimate;
  detail::fill_variations(r, sigma_hat(sys), surface.chain(), w, epsilons, sys.region_half_width());
  if (sys.dim() == 3) r.boundary_prediction = boundary_term(sys, surface, w);
  r.clamp_violation = detail::clamp_violation(w, {surface.source().chain(), surface.final_cycle().chain()});
  return r;
}

/// Trajectory resampled on a uniform time grid as a bounded 1-chain.
inline Chain trajectory_chain(const Trajectory& traj, int samples) {
  if (samples < 2) throw std::invalid_argument("trajectory chain: need at least 2 samples");
  const double t1 = traj.front().t(), t2 = traj.back().t();
  if (!(t2 > t1)) throw std::invalid_argument("trajectory chain: forward trajectory required");
  std::vector<double> data;
  for (int k = 0; k < samples; ++k) {
    const double t = (k + 1 == samples) ? t2 : t1 + (t2 - t1) * k / (samples - 1);
    const auto p = traj.at(t);
    data.insert(data.end(), p.coords().begin(), p.coords().end());
  }
  return Chain(traj.dim() + 1, {GridAxis::bounded(samples, t1, t2, "t")}, std::move(data));
}

inline constexpr int kDefaultActionSamples = 1025;

/// S = integral of p dq - H dt along the trajectory, its variations under
/// eps W, and the endpoint prediction [p_a W^{q_a}] from t1 to t2.
inline ActionReport hamiltonian_action_check(const HamiltonianSystem& hs, const Trajectory& traj,
                                             const VariationField& w, const std::vector<double>& epsilons,
                                             int samples = kDefaultActionSamples) {
  if (w.ncoords() != hs.ncoords()) throw std::invalid_argument("variation: dimension mismatch");
  const auto sigma = poincare_cartan(hs);
  const Chain chain = trajectory_chain(traj, samples);
  ActionReport r;
  const auto base = integrate_over_chain(sigma, chain);
  r.action = base.value;
  r.action_estimate = base.estimate;
  detail::fill_variations(r, sigma, chain, w, epsilons, hs.region_half_width());
  const int m = hs.dof();
  const auto endpoint = [&](const ExtendedPoint& p) {
    const auto v = w.at(p.coords());
    double s = 0.0;
    for (int a = 0; a < m; ++a) s += p.x()[m + a] * v[a];
    return s;
  };
  r.boundary_prediction = endpoint(traj.back()) - endpoint(traj.front());
  const auto faces = boundary(chain);
  r.clamp_violation = detail::clamp_violation(w, {faces[0].face, faces[1].face});
  return r;
}

}  // namespace nambu
