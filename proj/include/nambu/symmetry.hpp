#pragma once

// Symmetry candidates, integral invariants along the flow, and momentum
// one-forms for Nambu systems.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "nambu/chain.hpp"
#include "nambu/exterior.hpp"
#include "nambu/flow.hpp"
#include "nambu/nambu_system.hpp"
#include "nambu/sampling.hpp"

namespace nambu {

inline constexpr double kSymmetryTolerance = 1e-8;
inline constexpr int kSymmetrySamples = 200;

/// A vector field xi with a form chi of degree n - 2 such that
/// L_xi sigma_hat = d chi is claimed.
struct SymmetryCandidate {
  VectorField xi;
  DifferentialForm chi;
  std::string label;
};

/// xi from component expressions (n spatial, optionally one more for the
/// time component) and chi from coefficient/index terms.
inline SymmetryCandidate make_candidate(const NambuSystem& sys, const std::vector<std::string>& xi_components,
                                        const std::vector<std::pair<std::string, std::vector<int>>>& chi_terms,
                                        std::string label) {
  const int n = sys.dim(), nc = sys.ncoords();
  if (static_cast<int>(xi_components.size()) != n && static_cast<int>(xi_components.size()) != nc)
    throw std::invalid_argument("symmetry candidate: xi needs " + std::to_string(n) + " or " + std::to_string(nc) +
                                " components");
  std::vector<Expr> comps;
  for (const auto& s : xi_components) comps.push_back(parse(s));
  if (static_cast<int>(comps.size()) == n) comps.push_back(Expr::constant(0.0));
  std::vector<DifferentialForm::Term> terms;
  for (const auto& [coef, idx] : chi_terms) {
    for (int i : idx)
      if (i < 0 || i >= nc) throw std::invalid_argument("symmetry candidate: chi index out of range");
    terms.push_back({parse(coef), idx});
  }
  return {VectorField::from_exprs(std::move(comps)), DifferentialForm::from_terms(nc, n - 2, std::move(terms)),
          std::move(label)};
}

struct SymmetryReport {
  bool pass = false;
  double max_residual = 0.0;
  double tolerance = kSymmetryTolerance;
  std::vector<int> worst_basis;
  std::size_t worst_sample = 0;
  std::size_t samples = 0;
};

namespace detail {

inline void check_candidate(const NambuSystem& sys, const SymmetryCandidate& cand) {
  if (cand.xi.ncoords() != sys.ncoords() || cand.chi.ncoords() != sys.ncoords())
    throw std::invalid_argument("symmetry candidate '" + cand.label + "': dimension mismatch");
  if (cand.chi.degree() != sys.dim() - 2)
    throw std::invalid_argument("symmetry candidate '" + cand.label + "': chi must have degree n - 2");
}

/// Max |coefficient| of a form over sample points, with its location.
inline SymmetryReport max_coefficient(const DifferentialForm& f, const std::vector<ExtendedPoint>& pts, double tol) {
  SymmetryReport r;
  r.tolerance = tol;
  r.samples = pts.size();
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const auto c = f.coefficients(pts[s].coords());
    for (int b = 0; b < f.size(); ++b) {
      if (std::abs(c[b]) > r.max_residual || r.worst_basis.empty()) {
        r.max_residual = std::max(r.max_residual, std::abs(c[b]));
        r.worst_basis = f.basis().indices(b);
        r.worst_sample = s;
      }
    }
  }
  r.pass = r.max_residual <= tol;
  return r;
}

}  // namespace detail

/// Residual form L_xi sigma_hat - d chi.
inline DifferentialForm symmetry_residual_form(const NambuSystem& sys, const SymmetryCandidate& cand) {
  detail::check_candidate(sys, cand);
  return lie_derivative(cand.xi, sigma_hat(sys)) - exterior_derivative(cand.chi);
}

inline SymmetryReport check_symmetry(const NambuSystem& sys, const SymmetryCandidate& cand,
                                     const std::vector<ExtendedPoint>& points, double tol = kSymmetryTolerance) {
  return detail::max_coefficient(symmetry_residual_form(sys, cand), points, tol);
}

/// i_xi sigma_hat - chi, whose cycle integrals are conserved.
inline DifferentialForm relative_invariant_form(const NambuSystem& sys, const SymmetryCandidate& cand) {
  detail::check_candidate(sys, cand);
  return interior(cand.xi, sigma_hat(sys)) - cand.chi;
}

/// i_xi d sigma_hat, whose chain integrals are conserved.
inline DifferentialForm absolute_invariant_form(const NambuSystem& sys, const SymmetryCandidate& cand) {
  detail::check_candidate(sys, cand);
  return interior(cand.xi, exterior_derivative(sigma_hat(sys)));
}

struct InvariantReport {
  std::string generator;
  std::vector<double> times;
  std::vector<double> values;
  /// Quadrature plus integrator error estimate per time.
  std::vector<double> estimates;
  double drift = 0.0;
  /// drift / max(|value_0|, 1e-3).
  double relative_drift = 0.0;
  std::optional<SymmetryReport> symmetry;
  std::vector<std::string> warnings;
  double max_stretch = 1.0;

  double max_estimate() const {
    double m = 0.0;
    for (double e : estimates) m = std::max(m, e);
    return m;
  }
};

struct InvariantOptions {
  IntegratorParams integrator;
  /// Rerun transport at a coarser setting to estimate integrator error.
  bool estimate_integrator_error = true;
  /// Points for the symmetry precondition; skipped when empty.
  std::vector<ExtendedPoint> symmetry_points;
  double symmetry_tolerance = kSymmetryTolerance;
};

namespace detail {

inline void check_times(const std::vector<double>& times, double t0) {
  if (times.empty()) throw std::invalid_argument("invariant: no times requested");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t0) throw std::invalid_argument("invariant: times must not precede the source time");
    if (k > 0 && !(times[k] > times[k - 1])) throw std::invalid_argument("invariant: times must be strictly increasing");
  }
}

/// Coarser integrator settings and the matching Richardson divisor.
inline std::pair<IntegratorParams, double> coarser(const IntegratorParams& p) {
  IntegratorParams q = p;
  if (p.method == Method::rk4_fixed) {
    q.h = 2.0 * p.h;
    return {q, 15.0};
  }
  q.rtol = 32.0 * p.rtol;
  q.atol = 32.0 * p.atol;
  return {q, 1.0};
}

/// Transports the source chain through the requested times and integrates
/// `form` on each image.
inline std::vector<QuadratureResult> sweep(const Dynamics& dyn, const DifferentialForm& form, const Chain& source,
                                           const std::vector<double>& times, const IntegratorParams& params,
                                           double* max_stretch) {
  std::vector<QuadratureResult> out;
  Chain current = source;
  for (double tk : times) {
    current = transport_chain(dyn, current, tk, params);
    out.push_back(integrate_over_chain(form, current));
  }
  if (max_stretch) {
    const double before = max_adjacent_separation(source), after = max_adjacent_separation(current);
    *max_stretch = before > 0.0 ? after / before : 1.0;
  }
  return out;
}

inline InvariantReport invariant_sweep(const NambuSystem& sys, const SymmetryCandidate& cand,
                                       const DifferentialForm& form, const Chain& source,
                                       const std::vector<double>& times, const InvariantOptions& opt) {
  check_times(times, source.sample(0)[source.ncoords() - 1]);
  InvariantReport r;
  r.generator = cand.label;
  r.times = times;
  if (!opt.symmetry_points.empty()) {
    r.symmetry = check_symmetry(sys, cand, opt.symmetry_points, opt.symmetry_tolerance);
    if (!r.symmetry->pass)
      r.warnings.push_back("symmetry check failed (max residual " + format_number(r.symmetry->max_residual) +
                           "); invariant computed anyway");
  }
  const Dynamics dyn = nambu_dynamics(sys);
  const auto fine = sweep(dyn, form, source, times, opt.integrator, &r.max_stretch);
  if (r.max_stretch > 10.0)
    r.warnings.push_back("adjacent samples separated by " + format_number(r.max_stretch) +
                         "x the initial spacing; consider refining the cycle");
  std::vector<QuadratureResult> coarse;
  double divisor = 1.0;
  if (opt.estimate_integrator_error) {
    const auto [params, div] = coarser(opt.integrator);
    divisor = div;
    coarse = sweep(dyn, form, source, times, params, nullptr);
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    r.values.push_back(fine[k].value);
    double est = fine[k].estimate;
    if (!coarse.empty()) est += std::abs(fine[k].value - coarse[k].value) / divisor;
    r.estimates.push_back(est);
    r.drift = std::max(r.drift, std::abs(fine[k].value - fine[0].value));
  }
  r.relative_drift = r.drift / std::max(std::abs(r.values[0]), 1e-3);
  return r;
}

}  // namespace detail

/// f(t; c) = integral of (i_xi sigma_hat - chi) over the transported cycle.
inline InvariantReport relative_invariant(const NambuSystem& sys, const SymmetryCandidate& cand, const Cycle& c,
                                          const std::vector<double>& times, const InvariantOptions& opt = {}) {
  if (c.p() != sys.dim() - 2) throw std::invalid_argument("relative invariant: cycle dimension must be n - 2");
  return detail::invariant_sweep(sys, cand, relative_invariant_form(sys, cand), c.chain(), times, opt);
}

/// Integral of i_xi d sigma_hat over the transported chain.
inline InvariantReport absolute_invariant(const NambuSystem& sys, const SymmetryCandidate& cand, const Chain& seed,
                                          const std::vector<double>& times, const InvariantOptions& opt = {}) {
  if (seed.p() != sys.dim() - 1) throw std::invalid_argument("absolute invariant: chain dimension must be n - 1");
  return detail::invariant_sweep(sys, cand, absolute_invariant_form(sys, cand), seed, times, opt);
}

struct StokesReport {
  double chain_integral = 0.0;     // over s of i_xi d sigma_hat
  double boundary_integral = 0.0;  // over the boundary of (i_xi sigma_hat - chi)
  double residual = 0.0;           // |chain + boundary|
  double estimate = 0.0;
};

/// Consistency of the absolute and relative invariants: the chain integral
/// of i_xi d sigma_hat equals minus the boundary integral of
/// i_xi sigma_hat - chi.
inline StokesReport stokes_consistency(const NambuSystem& sys, const SymmetryCandidate& cand, const Chain& s) {
  StokesReport r;
  const auto a = integrate_over_chain(absolute_invariant_form(sys, cand), s);
  const auto b = integrate_over_boundary(relative_invariant_form(sys, cand), s);
  r.chain_integral = a.value;
  r.boundary_integral = b.value;
  r.residual = std::abs(a.value + b.value);
  r.estimate = a.estimate + b.estimate;
  return r;
}

// ---------------------------------------------------------------------------
// Momentum one-forms
// ---------------------------------------------------------------------------

struct Generator {
  std::string label;
  VectorField xi;
};

/// Generators xi_{E_j} with candidate forms P_j (degree n - 2) claimed to
/// satisfy i_{xi_j} d sigma_hat = -d P_j.
struct MomentumSystem {
  std::vector<Generator> generators;
  std::vector<DifferentialForm> candidates;

  void validate(const NambuSystem& sys) const {
    if (generators.size() != candidates.size())
      throw std::invalid_argument("momentum system: one candidate per generator required");
    for (std::size_t j = 0; j < generators.size(); ++j) {
      if (generators[j].xi.ncoords() != sys.ncoords() || candidates[j].ncoords() != sys.ncoords())
        throw std::invalid_argument("momentum system: dimension mismatch for '" + generators[j].label + "'");
      if (candidates[j].degree() != sys.dim() - 2)
        throw std::invalid_argument("momentum system: P for '" + generators[j].label + "' must have degree n - 2");
    }
  }

  /// sum_j c_j (xi_j, P_j).
  std::pair<VectorField, DifferentialForm> combine(const std::vector<double>& coeffs) const {
    if (coeffs.size() != generators.size()) throw std::invalid_argument("momentum system: coefficient count");
    if (generators.empty()) throw std::invalid_argument("momentum system: no generators");
    VectorField xi = coeffs[0] * generators[0].xi;
    DifferentialForm p = coeffs[0] * candidates[0];
    for (std::size_t j = 1; j < generators.size(); ++j) {
      xi = VectorField::combine(1.0, xi, coeffs[j], generators[j].xi);
      p = linear_combination(1.0, p, coeffs[j], candidates[j]);
    }
    return {xi, p};
  }
};

struct MomentumReport {
  std::string label;
  double closedness = 0.0;  // max |d(i_xi d sigma_hat)|
  double exactness = 0.0;   // max |i_xi d sigma_hat + d P|
  bool pass = false;
};

namespace detail {

inline double max_abs_coefficient(const DifferentialForm& f, const std::vector<ExtendedPoint>& pts) {
  double m = 0.0;
  for (const auto& p : pts)
    for (double c : f.coefficients(p.coords())) m = std::max(m, std::abs(c));
  return m;
}

/// Exactness residual at each sample point (max over basis).
inline std::vector<double> exactness_profile(const NambuSystem& sys, const VectorField& xi, const DifferentialForm& p,
                                             const std::vector<ExtendedPoint>& pts) {
  const auto f = interior(xi, exterior_derivative(sigma_hat(sys))) + exterior_derivative(p);
  std::vector<double> out;
  for (const auto& q : pts) {
    double m = 0.0;
    for (double c : f.coefficients(q.coords())) m = std::max(m, std::abs(c));
    out.push_back(m);
  }
  return out;
}

}  // namespace detail

inline MomentumReport verify_momentum_one_form(const NambuSystem& sys, const std::string& label,
                                               const VectorField& xi, const DifferentialForm& p,
                                               const std::vector<ExtendedPoint>& points,
                                               double tol = kSymmetryTolerance) {
  MomentumReport r;
  r.label = label;
  const auto beta = interior(xi, exterior_derivative(sigma_hat(sys)));
  r.closedness = detail::max_abs_coefficient(exterior_derivative(beta), points);
  r.exactness = detail::max_abs_coefficient(beta + exterior_derivative(p), points);
  r.pass = r.closedness <= tol && r.exactness <= tol;
  return r;
}

inline std::vector<MomentumReport> verify_momentum_one_forms(const NambuSystem& sys, const MomentumSystem& ms,
                                                             const std::vector<ExtendedPoint>& points,
                                                             double tol = kSymmetryTolerance) {
  ms.validate(sys);
  std::vector<MomentumReport> out;
  for (std::size_t j = 0; j < ms.generators.size(); ++j)
    out.push_back(verify_momentum_one_form(sys, ms.generators[j].label, ms.generators[j].xi, ms.candidates[j], points,
                                           tol));
  return out;
}

struct LinearityReport {
  /// max over samples of combined residual minus the weighted input bound.
  double excess = 0.0;
  double combined_residual = 0.0;
  double weighted_bound = 0.0;
};

/// Exactness residual of sum_j c_j (xi_j, P_j) against sum_j |c_j| times the
/// input residuals, pointwise.
inline LinearityReport momentum_linearity(const NambuSystem& sys, const MomentumSystem& ms,
                                          const std::vector<double>& coeffs,
                                          const std::vector<ExtendedPoint>& points) {
  ms.validate(sys);
  const auto [xi, p] = ms.combine(coeffs);
  const auto combined = detail::exactness_profile(sys, xi, p, points);
  std::vector<double> bound(points.size(), 0.0);
  for (std::size_t j = 0; j < ms.generators.size(); ++j) {
    const auto prof = detail::exactness_profile(sys, ms.generators[j].xi, ms.candidates[j], points);
    for (std::size_t s = 0; s < points.size(); ++s) bound[s] += std::abs(coeffs[j]) * prof[s];
  }
  LinearityReport r;
  r.excess = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < points.size(); ++s) {
    r.excess = std::max(r.excess, combined[s] - bound[s]);
    r.combined_residual = std::max(r.combined_residual, combined[s]);
    r.weighted_bound = std::max(r.weighted_bound, bound[s]);
  }
  if (points.empty()) r.excess = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Scaling inconsistency of a bilinear momentum ansatz
// ---------------------------------------------------------------------------

struct ScalingReport {
  double lambda = 1.0;
  double lhs_scale = 0.0;  // lhs(lambda X) / lhs(X), least squares
  double rhs_scale = 0.0;  // rhs(lambda X) / rhs(X), least squares
  double ratio = 0.0;      // rhs_scale / lhs_scale
  bool degenerate = false;
  std::size_t samples = 0;
};

/// Compares lhs(X) = i_{xi_X} d sigma_hat, linear in X, with the ansatz
/// rhs(X) = d P1_X ^ d P2_X where P_k scale with X. For the generator
/// lambda X the two sides scale by lambda and lambda^2; the returned ratio
/// of fitted scales is lambda.
inline ScalingReport scaling_mismatch(const NambuSystem& sys, const VectorField& xi, const Expr& p1, const Expr& p2,
                                      double lambda, const std::vector<ExtendedPoint>& points, std::uint64_t seed) {
  if (sys.dim() != 3) throw std::invalid_argument("scaling demo: requires n = 3");
  if (!std::isfinite(lambda) || lambda == 0.0) throw std::invalid_argument("scaling demo: lambda must be nonzero");
  const int nc = sys.ncoords();
  const auto dsig = exterior_derivative(sigma_hat(sys));
  const auto lhs = [&](double s) { return interior(s * xi, dsig); };
  const auto rhs = [&](double s) {
    return wedge(exterior_derivative(s * DifferentialForm::scalar(nc, p1)),
                 exterior_derivative(s * DifferentialForm::scalar(nc, p2)));
  };
  const auto l1 = lhs(1.0), ll = lhs(lambda), r1 = rhs(1.0), rl = rhs(lambda);
  std::mt19937_64 gen(seed);
  double lnum = 0, lden = 0, rnum = 0, rden = 0;
  for (const auto& p : points) {
    const auto vs = sample_vectors(nc, 2, gen);
    const double a1 = evaluate(l1, p, vs), al = evaluate(ll, p, vs);
    const double b1 = evaluate(r1, p, vs), bl = evaluate(rl, p, vs);
    lnum += a1 * al;
    lden += a1 * a1;
    rnum += b1 * bl;
    rden += b1 * b1;
  }
  ScalingReport r;
  r.lambda = lambda;
  r.samples = points.size();
  if (lden == 0.0 || rden == 0.0) throw std::invalid_argument("scaling demo: both sides vanish on all samples");
  r.lhs_scale = lnum / lden;
  r.rhs_scale = rnum / rden;
  r.ratio = r.rhs_scale / r.lhs_scale;
  r.degenerate = lambda == 1.0;
  return r;
}

}  // namespace nambu
