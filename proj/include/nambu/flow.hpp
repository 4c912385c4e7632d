#pragma once

// Trajectories, cycle transport and solution surfaces.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nambu/chain.hpp"
#include "nambu/exterior.hpp"
#include "nambu/nambu_system.hpp"
#include "nambu/ode.hpp"
#include "nambu/parallel.hpp"

namespace nambu {

enum class Method { rk4_fixed, rk45_adaptive };

struct IntegratorParams {
  Method method = Method::rk4_fixed;
  double h = 1e-3;
  double rtol = 1e-10;
  double atol = 1e-12;
  long max_steps = 10'000'000;
  bool allow_backward = false;

  void validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("integrator: h must be positive");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("integrator: rtol and atol must be positive");
    if (max_steps < 1) throw std::invalid_argument("integrator: max_steps must be at least 1");
  }
};

class FlowError : public std::runtime_error {
 public:
  enum class Kind { step_underflow, region_exit, max_steps, non_finite };

  FlowError(Kind kind, double t, const std::string& what, long sample_index = -1)
      : std::runtime_error(what), kind_(kind), t_(t), sample_index_(sample_index) {}

  Kind kind() const { return kind_; }
  double time() const { return t_; }
  long sample_index() const { return sample_index_; }

  FlowError at_sample(long index) const {
    return FlowError(kind_, t_, "sample " + std::to_string(index) + ": " + what(), index);
  }

 private:
  Kind kind_;
  double t_;
  long sample_index_;
};

/// First-order system x' = v(t, x) on n spatial coordinates, with t
/// advancing at unit rate.
struct Dynamics {
  int dim = 0;
  std::function<void(double t, std::span<const double> x, std::span<double> v)> velocity;
  double region_half_width = kDefaultRegionHalfWidth;
};

inline Dynamics nambu_dynamics(const NambuSystem& sys) {
  Dynamics d;
  d.dim = sys.dim();
  d.region_half_width = sys.region_half_width();
  d.velocity = [sys](double t, std::span<const double> x, std::span<double> v) {
    const int n = sys.dim();
    std::vector<Dual> duals(x.begin(), x.end());
    std::vector<std::vector<double>> grads;
    grads.reserve(n - 1);
    for (const auto& h : sys.hamiltonians()) {
      std::vector<double> g(n, 0.0);
      for (int seed = 0; seed < n; ++seed) {
        if (!h.uses_slot(seed)) continue;
        for (int i = 0; i < n; ++i) duals[i].derivative = (i == seed) ? 1.0 : 0.0;
        g[seed] = eval_as<Dual>(h, duals, Dual(t, 0.0)).derivative;
      }
      grads.push_back(std::move(g));
    }
    const auto vel = detail::levi_civita_contract(grads, n);
    std::copy(vel.begin(), vel.end(), v.begin());
  };
  return d;
}

class Trajectory {
 public:
  Trajectory(int dim, std::vector<double> times, std::vector<double> states, std::vector<double> velocities)
      : dim_(dim), times_(std::move(times)), states_(std::move(states)), velocities_(std::move(velocities)) {
    if (times_.empty()) throw std::invalid_argument("trajectory: no samples");
    if (states_.size() != times_.size() * dim_ || velocities_.size() != states_.size())
      throw std::invalid_argument("trajectory: inconsistent sample arrays");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if ((times_[i] - times_[i - 1]) * direction() <= 0.0)
        throw std::invalid_argument("trajectory: times are not strictly monotone");
  }

  int dim() const { return dim_; }
  std::size_t size() const { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  const std::vector<double>& times() const { return times_; }
  std::span<const double> state(std::size_t i) const { return {states_.data() + i * dim_, std::size_t(dim_)}; }
  std::span<const double> velocity(std::size_t i) const { return {velocities_.data() + i * dim_, std::size_t(dim_)}; }
  ExtendedPoint point(std::size_t i) const {
    return ExtendedPoint(std::vector<double>(state(i).begin(), state(i).end()), times_[i]);
  }
  ExtendedPoint front() const { return point(0); }
  ExtendedPoint back() const { return point(size() - 1); }
  /// +1 for forward integration, -1 for backward.
  int direction() const { return times_.size() > 1 && times_.back() < times_.front() ? -1 : 1; }

  /// Cubic Hermite interpolation on stored (state, velocity) pairs.
  ExtendedPoint at(double t) const {
    const double lo = std::min(times_.front(), times_.back()), hi = std::max(times_.front(), times_.back());
    if (t < lo || t > hi) throw std::out_of_range("trajectory: time outside the integrated interval");
    if (size() == 1) return front();
    std::size_t k;
    if (direction() > 0) {
      k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    } else {
      k = static_cast<std::size_t>(
          std::upper_bound(times_.begin(), times_.end(), t, std::greater<double>()) - times_.begin());
    }
    k = std::clamp<std::size_t>(k, 1, size() - 1);
    const double t0 = times_[k - 1], t1 = times_[k], h = t1 - t0, s = (t - t0) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s), h01 = s * s * (3 - 2 * s),
                 h11 = s * s * (s - 1);
    std::vector<double> x(dim_);
    for (int i = 0; i < dim_; ++i)
      x[i] = h00 * state(k - 1)[i] + h10 * h * velocity(k - 1)[i] + h01 * state(k)[i] + h11 * h * velocity(k)[i];
    return ExtendedPoint(std::move(x), t);
  }

  /// CSV rows "sample-index,t,x1..xn"; the header is written when requested.
  void write_csv(std::ostream& os, long sample_index = 0, bool header = true) const {
    if (header) {
      os << "sample,t";
      for (int i = 0; i < dim_; ++i) os << ",x" << i + 1;
      os << '\n';
    }
    for (std::size_t k = 0; k < size(); ++k) {
      os << sample_index << ',' << detail::format_number(times_[k]);
      for (double v : state(k)) os << ',' << detail::format_number(v);
      os << '\n';
    }
  }

 private:
  int dim_;
  std::vector<double> times_;
  std::vector<double> states_;
  std::vector<double> velocities_;
};

namespace detail {

inline void check_state(const Dynamics& dyn, double t, std::span<const double> x) {
  for (int i = 0; i < dyn.dim; ++i) {
    if (!std::isfinite(x[i]))
      throw FlowError(FlowError::Kind::non_finite, t, "non-finite state at t = " + format_number(t));
    if (std::abs(x[i]) > dyn.region_half_width)
      throw FlowError(FlowError::Kind::region_exit, t,
                      "trajectory left the region |x_i| <= " + format_number(dyn.region_half_width) + " at t = " +
                          format_number(t));
  }
}

/// Advances a state from t1 to t2, reporting every accepted step.
struct Stepper {
  const Dynamics& dyn;
  const IntegratorParams& params;
  std::function<void(double, std::span<const double>)> on_step;

  void run(std::vector<double>& x, double t1, double t2) const {
    const ode::Rhs rhs = [this](double s, std::span<const double> y, std::span<double> dy) {
      dyn.velocity(s, y, dy);
    };
    check_state(dyn, t1, x);
    if (on_step) on_step(t1, x);
    const double span_t = t2 - t1;
    if (span_t == 0.0) return;
    const double sign = span_t > 0 ? 1.0 : -1.0;
    if (params.method == Method::rk4_fixed) {
      const double steps_d = std::ceil(std::abs(span_t) / params.h - 1e-9);
      const long steps = std::max(1L, static_cast<long>(steps_d));
      if (steps > params.max_steps)
        throw FlowError(FlowError::Kind::max_steps, t1,
                        "rk4 needs " + std::to_string(steps) + " steps, above max_steps " +
                            std::to_string(params.max_steps));
      const double h = span_t / static_cast<double>(steps);
      for (long k = 0; k < steps; ++k) {
        const double t = t1 + h * static_cast<double>(k);
        ode::rk4_step(rhs, t, x, h);
        const double tn = (k + 1 == steps) ? t2 : t1 + h * static_cast<double>(k + 1);
        check_state(dyn, tn, x);
        if (on_step) on_step(tn, x);
      }
      return;
    }
    double t = t1;
    double h = sign * std::min(std::abs(span_t), std::max(params.h, 1e-6 * std::abs(span_t)));
    std::vector<double> trial(x.size());
    long steps = 0;
    while ((t2 - t) * sign > 0.0) {
      if (++steps > params.max_steps)
        throw FlowError(FlowError::Kind::max_steps, t, "rk45 exceeded max_steps at t = " + format_number(t));
      if ((t + h - t2) * sign > 0.0) h = t2 - t;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
        throw FlowError(FlowError::Kind::step_underflow, t, "step size underflow at t = " + format_number(t));
      const double err = ode::dopri5_trial(rhs, t, x, h, trial, params.rtol, params.atol);
      if (!std::isfinite(err)) {
        h *= 0.2;
        continue;
      }
      if (err <= 1.0) {
        const bool last = std::abs(t2 - (t + h)) <= 1e-15 * std::max(1.0, std::abs(t2));
        t = last ? t2 : t + h;
        x = trial;
        check_state(dyn, t, x);
        if (on_step) on_step(t, x);
      }
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= factor;
    }
  }
};

inline void check_interval(double t1, double t2, const IntegratorParams& params) {
  params.validate();
  if (!std::isfinite(t1) || !std::isfinite(t2)) throw std::invalid_argument("integrate: times must be finite");
  if (t2 < t1 && !params.allow_backward)
    throw std::invalid_argument("integrate: t2 < t1 requires allow_backward");
}

}  // namespace detail

inline Trajectory integrate(const Dynamics& dyn, const ExtendedPoint& p0, double t2,
                            const IntegratorParams& params = {}) {
  const double t1 = p0.t();
  detail::check_interval(t1, t2, params);
  if (p0.dim() != dyn.dim) throw std::invalid_argument("integrate: point dimension mismatch");
  std::vector<double> times, states, vels;
  std::vector<double> v(dyn.dim);
  detail::Stepper stepper{dyn, params, [&](double t, std::span<const double> x) {
                            times.push_back(t);
                            states.insert(states.end(), x.begin(), x.end());
                            dyn.velocity(t, x, v);
                            vels.insert(vels.end(), v.begin(), v.end());
                          }};
  std::vector<double> x(p0.x().begin(), p0.x().end());
  stepper.run(x, t1, t2);
  return Trajectory(dyn.dim, std::move(times), std::move(states), std::move(vels));
}

inline Trajectory integrate(const NambuSystem& sys, const ExtendedPoint& p0, double t2,
                            const IntegratorParams& params = {}) {
  return integrate(nambu_dynamics(sys), p0, t2, params);
}

/// Final state only; avoids storing the trajectory.
inline ExtendedPoint flow_point(const Dynamics& dyn, const ExtendedPoint& p0, double t2,
                                const IntegratorParams& params = {}) {
  detail::check_interval(p0.t(), t2, params);
  if (p0.dim() != dyn.dim) throw std::invalid_argument("flow: point dimension mismatch");
  std::vector<double> x(p0.x().begin(), p0.x().end());
  detail::Stepper{dyn, params, {}}.run(x, p0.t(), t2);
  return ExtendedPoint(std::move(x), t2);
}

struct TransportReport {
  /// Largest adjacent-sample separation divided by the initial one.
  double max_stretch = 1.0;
  bool refinement_warning = false;
};

namespace detail {

inline double max_adjacent_separation(const Chain& c) {
  const auto strides = c.strides();
  const int nc = c.ncoords();
  double best = 0.0;
  for (std::size_t f = 0; f < c.sample_count(); ++f) {
    for (int a = 0; a < c.p(); ++a) {
      const auto& ax = c.axes()[a];
      const std::size_t i = (f / strides[a]) % ax.count;
      std::size_t g;
      if (i + 1 < static_cast<std::size_t>(ax.count)) {
        g = f + strides[a];
      } else if (ax.periodic && ax.count > 1) {
        g = f - i * strides[a];
      } else {
        continue;
      }
      double d2 = 0.0;
      for (int k = 0; k + 1 < nc; ++k) {
        const double d = c.sample(f)[k] - c.sample(g)[k];
        d2 += d * d;
      }
      best = std::max(best, std::sqrt(d2));
    }
  }
  return best;
}

/// Moves every sample of a fixed-time chain to t_target. Samples are
/// integrated independently; errors carry the sample index.
inline Chain transport_samples(const Dynamics& dyn, const Chain& c, double t_target, const IntegratorParams& params,
                               TransportReport* report) {
  const int nc = c.ncoords();
  if (nc - 1 != dyn.dim) throw std::invalid_argument("transport: dimension mismatch");
  std::vector<double> data(c.data().begin(), c.data().end());
  parallel_for(c.sample_count(), [&](std::size_t f) {
    const ExtendedPoint p = c.point(f);
    try {
      const ExtendedPoint q = flow_point(dyn, p, t_target, params);
      std::copy(q.coords().begin(), q.coords().end(), data.begin() + f * nc);
    } catch (const FlowError& e) {
      throw e.at_sample(static_cast<long>(f));
    }
  });
  Chain out = c.with_data(std::move(data));
  if (report) {
    const double before = max_adjacent_separation(c), after = max_adjacent_separation(out);
    report->max_stretch = before > 0.0 ? after / before : 1.0;
    report->refinement_warning = report->max_stretch > 10.0;
  }
  return out;
}

}  // namespace detail

inline Cycle transport_cycle(const Dynamics& dyn, const Cycle& c, double t_target, const IntegratorParams& params = {},
                             TransportReport* report = nullptr) {
  return Cycle(detail::transport_samples(dyn, c.chain(), t_target, params, report));
}

inline Cycle transport_cycle(const NambuSystem& sys, const Cycle& c, double t_target,
                             const IntegratorParams& params = {}, TransportReport* report = nullptr) {
  return transport_cycle(nambu_dynamics(sys), c, t_target, params, report);
}

/// Transports a chain whose samples all share one time value.
inline Chain transport_chain(const Dynamics& dyn, const Chain& c, double t_target, const IntegratorParams& params = {},
                             TransportReport* report = nullptr) {
  const double t0 = c.sample(0)[c.ncoords() - 1];
  for (std::size_t f = 1; f < c.sample_count(); ++f)
    if (c.sample(f)[c.ncoords() - 1] != t0) throw std::invalid_argument("transport: chain samples differ in time");
  return detail::transport_samples(dyn, c, t_target, params, report);
}

/// Grid of flow images of a cycle: axes (cycle axes..., t). Column j is the
/// image of the source cycle at time t_j, and the chain orientation is
/// chosen so that its boundary is c1 - c2.
class SolutionSurface {
 public:
  SolutionSurface(Cycle source, std::vector<double> times, Chain chain)
      : source_(std::move(source)), times_(std::move(times)), chain_(std::move(chain)) {}

  const Cycle& source() const { return source_; }
  const std::vector<double>& times() const { return times_; }
  double t1() const { return times_.front(); }
  double t2() const { return times_.back(); }
  const Chain& chain() const { return chain_; }
  std::size_t time_count() const { return times_.size(); }

  /// The cycle formed by column j.
  Cycle column(std::size_t j) const {
    const auto& c = chain_;
    const int tax = c.p() - 1;
    const auto strides = c.strides();
    std::vector<double> data;
    for (std::size_t f = 0; f < c.sample_count(); ++f) {
      if ((f / strides[tax]) % c.axes()[tax].count != j) continue;
      const auto s = c.sample(f);
      data.insert(data.end(), s.begin(), s.end());
    }
    return Cycle(Chain(c.ncoords(), source_.chain().axes(), std::move(data)));
  }
  Cycle final_cycle() const { return column(times_.size() - 1); }

  /// CSV rows "sample,t,x1..xn" with the sample index within the cycle.
  void write_csv(std::ostream& os) const {
    const int n = chain_.ncoords() - 1;
    os << "sample,t";
    for (int i = 0; i < n; ++i) os << ",x" << i + 1;
    os << '\n';
    for (std::size_t j = 0; j < times_.size(); ++j) {
      const Cycle col = column(j);
      for (std::size_t s = 0; s < col.sample_count(); ++s) {
        const auto pt = col.chain().sample(s);
        os << s << ',' << detail::format_number(pt[n]);
        for (int i = 0; i < n; ++i) os << ',' << detail::format_number(pt[i]);
        os << '\n';
      }
    }
  }

 private:
  Cycle source_;
  std::vector<double> times_;
  Chain chain_;
};

inline SolutionSurface build_solution_surface(const Dynamics& dyn, const Cycle& c1, double t2, int time_samples,
                                              const IntegratorParams& params = {},
                                              TransportReport* report = nullptr) {
  const double t1 = c1.time();
  if (!(t2 > t1)) throw std::invalid_argument("solution surface: need t2 > t1");
  if (time_samples < 2) throw std::invalid_argument("solution surface: need at least 2 time samples");
  std::vector<double> times(time_samples);
  for (int j = 0; j < time_samples; ++j) times[j] = t1 + (t2 - t1) * j / (time_samples - 1);
  times.back() = t2;

  const Chain& src = c1.chain();
  const int nc = src.ncoords();
  const std::size_t ns = src.sample_count();
  std::vector<double> data(ns * time_samples * nc);
  parallel_for(ns, [&](std::size_t s) {
    std::vector<double> x(src.sample(s).begin(), src.sample(s).end() - 1);
    try {
      for (int j = 0; j < time_samples; ++j) {
        if (j > 0) detail::Stepper{dyn, params, {}}.run(x, times[j - 1], times[j]);
        double* out = data.data() + (s * time_samples + j) * nc;
        std::copy(x.begin(), x.end(), out);
        out[nc - 1] = times[j];
      }
    } catch (const FlowError& e) {
      throw e.at_sample(static_cast<long>(s));
    }
  });
  std::vector<GridAxis> axes = src.axes();
  axes.push_back(GridAxis::bounded(time_samples, t1, t2, "t"));
  const int orientation = ((axes.size() - 1) % 2 == 1) ? 1 : -1;
  Chain chain(nc, std::move(axes), std::move(data), orientation);
  SolutionSurface surface(c1, std::move(times), std::move(chain));
  if (report) {
    const double before = detail::max_adjacent_separation(src);
    const double after = detail::max_adjacent_separation(surface.final_cycle().chain());
    report->max_stretch = before > 0.0 ? after / before : 1.0;
    report->refinement_warning = report->max_stretch > 10.0;
  }
  return surface;
}

inline SolutionSurface build_solution_surface(const NambuSystem& sys, const Cycle& c1, double t2, int time_samples,
                                              const IntegratorParams& params = {},
                                              TransportReport* report = nullptr) {
  return build_solution_surface(nambu_dynamics(sys), c1, t2, time_samples, params, report);
}

}  // namespace nambu
