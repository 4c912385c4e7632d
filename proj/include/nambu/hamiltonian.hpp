#pragma once

// Hamiltonian mechanics on extended phase space (q, p, t) with the
// Poincare-Cartan form, built on the same calculus and flow code as the
// Nambu path.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nambu/exterior.hpp"
#include "nambu/expr.hpp"
#include "nambu/flow.hpp"
#include "nambu/nambu_system.hpp"
#include "nambu/symmetry.hpp"

namespace nambu {

class HamiltonianSystem {
 public:
  /// H over the canonical scheme: q1..qm in slots 0..m-1, p1..pm in m..2m-1.
  HamiltonianSystem(int dof, Expr h, std::string label = "hamiltonian",
                    double region_half_width = kDefaultRegionHalfWidth)
      : dof_(dof), h_(std::move(h)), label_(std::move(label)), region_half_width_(region_half_width) {
    if (dof < 1 || 2 * dof > kMaxSpatialSlots) throw std::invalid_argument("hamiltonian system: dof must be 1..3");
    if (h_.max_slot() >= 2 * dof) throw std::invalid_argument("hamiltonian system: H uses a coordinate beyond 2m");
    if (!(region_half_width > 0.0)) throw std::invalid_argument("hamiltonian system: region must be positive");
  }

  static HamiltonianSystem from_source(int dof, const std::string& h, std::string label = "hamiltonian") {
    return HamiltonianSystem(dof, parse(h, VariableScheme::canonical(dof)), std::move(label));
  }

  int dof() const { return dof_; }
  int dim() const { return 2 * dof_; }
  int ncoords() const { return 2 * dof_ + 1; }
  const Expr& hamiltonian() const { return h_; }
  const std::string& label() const { return label_; }
  double region_half_width() const { return region_half_width_; }

 private:
  int dof_;
  Expr h_;
  std::string label_;
  double region_half_width_;
};

/// p_a dq^a - H dt.
inline DifferentialForm poincare_cartan(const HamiltonianSystem& hs) {
  const int m = hs.dof(), nc = hs.ncoords();
  const VariableScheme scheme = VariableScheme::canonical(m);
  std::vector<DifferentialForm::Term> terms;
  for (int a = 0; a < m; ++a) terms.push_back({parse("p" + std::to_string(a + 1), scheme), {a}});
  DifferentialForm pdq = DifferentialForm::from_terms(nc, 1, std::move(terms));
  return pdq - wedge(DifferentialForm::scalar(nc, hs.hamiltonian()), DifferentialForm::differential(nc, nc - 1));
}

struct HamiltonVelocity {
  TangentVector velocity;
  /// max |i_v d sigma| over the coordinate basis.
  double residual = 0.0;
};

inline HamiltonVelocity hamilton_velocity(const HamiltonianSystem& hs, const ExtendedPoint& p) {
  const int m = hs.dof();
  if (p.dim() != hs.dim()) throw std::invalid_argument("hamilton velocity: point dimension mismatch");
  const auto g = gradient(hs.hamiltonian(), p.x(), p.t());
  std::vector<double> v(2 * m);
  for (int a = 0; a < m; ++a) {
    v[a] = g[m + a];
    v[m + a] = -g[a];
  }
  HamiltonVelocity r{TangentVector(std::move(v), 1.0), 0.0};
  const auto contracted = interior(VectorField::constant(r.velocity), exterior_derivative(poincare_cartan(hs)));
  for (double c : contracted.coefficients(p.coords())) r.residual = std::max(r.residual, std::abs(c));
  return r;
}

inline Dynamics hamiltonian_dynamics(const HamiltonianSystem& hs) {
  Dynamics d;
  d.dim = hs.dim();
  d.region_half_width = hs.region_half_width();
  d.velocity = [hs](double t, std::span<const double> x, std::span<double> v) {
    const int m = hs.dof();
    std::vector<Dual> duals(x.begin(), x.end());
    for (int seed = 0; seed < 2 * m; ++seed) {
      double g = 0.0;
      if (hs.hamiltonian().uses_slot(seed)) {
        for (int i = 0; i < 2 * m; ++i) duals[i].derivative = (i == seed) ? 1.0 : 0.0;
        g = eval_as<Dual>(hs.hamiltonian(), duals, Dual(t, 0.0)).derivative;
      }
      if (seed < m)
        v[m + seed] = -g;
      else
        v[seed - m] = g;
    }
  };
  return d;
}

inline Trajectory integrate(const HamiltonianSystem& hs, const ExtendedPoint& p0, double t2,
                            const IntegratorParams& params = {}) {
  return integrate(hamiltonian_dynamics(hs), p0, t2, params);
}

/// Symmetry candidate with a scalar chi, components over the canonical scheme.
inline SymmetryCandidate make_hamiltonian_candidate(const HamiltonianSystem& hs,
                                                    const std::vector<std::string>& xi_components,
                                                    const std::string& chi, std::string label) {
  const int n = hs.dim(), nc = hs.ncoords();
  if (static_cast<int>(xi_components.size()) != n && static_cast<int>(xi_components.size()) != nc)
    throw std::invalid_argument("hamiltonian candidate: xi needs 2m or 2m + 1 components");
  const VariableScheme scheme = VariableScheme::canonical(hs.dof());
  std::vector<Expr> comps;
  for (const auto& s : xi_components) comps.push_back(parse(s, scheme));
  if (static_cast<int>(comps.size()) == n) comps.push_back(Expr::constant(0.0));
  return {VectorField::from_exprs(std::move(comps)), DifferentialForm::scalar(nc, parse(chi, scheme)),
          std::move(label)};
}

inline SymmetryReport check_hamiltonian_symmetry(const HamiltonianSystem& hs, const SymmetryCandidate& cand,
                                                 const std::vector<ExtendedPoint>& points,
                                                 double tol = kSymmetryTolerance) {
  if (cand.chi.degree() != 0) throw std::invalid_argument("hamiltonian candidate: chi must be a scalar");
  const auto residual = lie_derivative(cand.xi, poincare_cartan(hs)) - exterior_derivative(cand.chi);
  return detail::max_coefficient(residual, points, tol);
}

/// f_xi = i_xi sigma - chi, conserved along solutions when L_xi sigma = d chi.
class ConservedFunction {
 public:
  ConservedFunction(DifferentialForm f, SymmetryReport check, std::vector<std::string> warnings)
      : f_(std::move(f)), check_(std::move(check)), warnings_(std::move(warnings)) {}

  double operator()(const ExtendedPoint& p) const { return f_.coefficients(p.coords())[0]; }
  const DifferentialForm& form() const { return f_; }
  const SymmetryReport& check() const { return check_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  DifferentialForm f_;
  SymmetryReport check_;
  std::vector<std::string> warnings_;
};

inline ConservedFunction conserved_function(const HamiltonianSystem& hs, const SymmetryCandidate& cand,
                                            const std::vector<ExtendedPoint>& points,
                                            double tol = kSymmetryTolerance) {
  auto check = check_hamiltonian_symmetry(hs, cand, points, tol);
  std::vector<std::string> warnings;
  if (!check.pass)
    warnings.push_back("symmetry check failed (max residual " + detail::format_number(check.max_residual) +
                       "); conserved function computed anyway");
  return ConservedFunction(interior(cand.xi, poincare_cartan(hs)) - cand.chi, std::move(check), std::move(warnings));
}

/// max |f(gamma(t_k)) - f(gamma(t_0))| over the stored samples.
template <class F>
double drift_along(const F& f, const Trajectory& traj) {
  const double f0 = f(traj.front());
  double d = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) d = std::max(d, std::abs(f(traj.point(k)) - f0));
  return d;
}

struct ExtendedMomentumReport {
  std::string label;
  double residual = 0.0;   // max |i_xi d sigma + d P|
  double pdot_drift = 0.0; // max drift of P along trajectories
  bool pass = false;
};

/// Scalar momentum candidates P_X with i_{xi_X} d sigma = -d P_X, and P_X
/// conserved along trajectories from the given starts over [t0, t0 + T].
inline std::vector<ExtendedMomentumReport> verify_extended_momentum_map(
    const HamiltonianSystem& hs, const std::vector<Generator>& generators,
    const std::vector<DifferentialForm>& candidates, const std::vector<ExtendedPoint>& points,
    const std::vector<ExtendedPoint>& starts, double duration, const IntegratorParams& params = {},
    double residual_tol = kSymmetryTolerance, double drift_tol = 1e-9) {
  if (generators.size() != candidates.size())
    throw std::invalid_argument("momentum map: one candidate per generator required");
  const auto dsigma = exterior_derivative(poincare_cartan(hs));
  std::vector<Trajectory> trajs;
  for (const auto& s : starts) trajs.push_back(integrate(hs, s, s.t() + duration, params));
  std::vector<ExtendedMomentumReport> out;
  for (std::size_t j = 0; j < generators.size(); ++j) {
    if (candidates[j].degree() != 0 || candidates[j].ncoords() != hs.ncoords())
      throw std::invalid_argument("momentum map: candidate for '" + generators[j].label + "' must be a scalar");
    ExtendedMomentumReport r;
    r.label = generators[j].label;
    const auto f = interior(generators[j].xi, dsigma) + exterior_derivative(candidates[j]);
    r.residual = detail::max_abs_coefficient(f, points);
    const auto& cand = candidates[j];
    for (const auto& tr : trajs)
      r.pdot_drift = std::max(r.pdot_drift, drift_along([&](const ExtendedPoint& p) {
        return cand.coefficients(p.coords())[0];
      }, tr));
    r.pass = r.residual <= residual_tol && r.pdot_drift <= drift_tol;
    out.push_back(std::move(r));
  }
  return out;
}

struct EulerTopEmbeddingReport {
  double energy_drift = 0.0;           // relative drift of H1
  double angular_momentum_drift = 0.0; // relative drift of H2 = |L|^2 / 2
  double initial_speed = 0.0;
  double max_displacement = 0.0;
  bool frozen = false;
};

/// Integrates the Euler top as a Nambu system and checks that both Nambu
/// Hamiltonians are conserved. Here the conserved functions are the
/// Hamiltonians themselves rather than outputs of the symmetry machinery.
inline EulerTopEmbeddingReport euler_top_embedding_check(double i1, double i2, double i3,
                                                         const std::vector<double>& initial, double duration,
                                                         const IntegratorParams& params = {}) {
  const NambuSystem sys = builtin_system("euler-top", {{"I1", i1}, {"I2", i2}, {"I3", i3}});
  const ExtendedPoint p0(initial, 0.0);
  const auto traj = integrate(sys, p0, duration, params);
  EulerTopEmbeddingReport r;
  const auto rel = [&](const Expr& h) {
    const double h0 = eval(h, p0.x());
    return drift_along([&](const ExtendedPoint& p) { return eval(h, p.x()); }, traj) / std::max(std::abs(h0), 1e-300);
  };
  r.energy_drift = rel(sys.hamiltonians()[0]);
  r.angular_momentum_drift = rel(sys.hamiltonians()[1]);
  const auto v = velocity(sys, p0);
  for (double c : v.spatial()) r.initial_speed += c * c;
  r.initial_speed = std::sqrt(r.initial_speed);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) d2 += std::pow(traj.state(k)[i] - initial[i], 2);
    r.max_displacement = std::max(r.max_displacement, std::sqrt(d2));
  }
  r.frozen = r.max_displacement == 0.0;
  return r;
}

}  // namespace nambu
