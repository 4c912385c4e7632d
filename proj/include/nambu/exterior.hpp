#pragma once

// Pointwise exterior calculus on extended phase space (x_1..x_n, t).
//
// A k-form is a coefficient field over the dense coordinate basis
// dx_{i1} ^ ... ^ dx_{ik}, i1 < ... < ik, with time as the last coordinate.
// Expression-backed ("analytic") forms evaluate their coefficients as Jets so
// every exterior derivative is exact; "numeric" forms fall back to central
// differences.

#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nambu/expr.hpp"
#include "nambu/jet.hpp"
#include "nambu/ode.hpp"

namespace nambu {

inline constexpr int kMaxCoords = kMaxSpatialSlots + 1;

/// Point (x, t) of extended phase space, 2 <= n <= 6.
class ExtendedPoint {
 public:
  ExtendedPoint() = default;
  ExtendedPoint(std::vector<double> x, double t) : coords_(std::move(x)) {
    coords_.push_back(t);
    check();
  }

  static ExtendedPoint from_coords(std::span<const double> coords) {
    ExtendedPoint p;
    p.coords_.assign(coords.begin(), coords.end());
    p.check();
    return p;
  }

  int dim() const { return static_cast<int>(coords_.size()) - 1; }
  std::span<const double> x() const { return {coords_.data(), coords_.size() - 1}; }
  double t() const { return coords_.back(); }
  std::span<const double> coords() const { return coords_; }
  int ncoords() const { return static_cast<int>(coords_.size()); }

 private:
  void check() const {
    const int n = static_cast<int>(coords_.size()) - 1;
    if (n < 2 || n > kMaxSpatialSlots)
      throw std::invalid_argument("extended point: phase-space dimension must be in [2, 6], got " + std::to_string(n));
  }

  std::vector<double> coords_;
};

/// Tangent vector (spatial, time component) at a point of extended phase space.
class TangentVector {
 public:
  TangentVector() = default;
  TangentVector(std::vector<double> spatial, double time_component) : comps_(std::move(spatial)) {
    comps_.push_back(time_component);
    check();
  }

  static TangentVector from_components(std::span<const double> comps) {
    TangentVector v;
    v.comps_.assign(comps.begin(), comps.end());
    v.check();
    return v;
  }

  /// Unit vector along coordinate i (time is index ncoords - 1).
  static TangentVector basis(int ncoords, int i) {
    std::vector<double> c(ncoords, 0.0);
    c.at(i) = 1.0;
    return from_components(c);
  }

  std::span<const double> spatial() const { return {comps_.data(), comps_.size() - 1}; }
  double time_component() const { return comps_.back(); }
  std::span<const double> components() const { return comps_; }
  int ncoords() const { return static_cast<int>(comps_.size()); }

 private:
  void check() const {
    if (comps_.size() < 2 || comps_.size() > static_cast<std::size_t>(kMaxCoords))
      throw std::invalid_argument("tangent vector: bad dimension");
    for (double c : comps_)
      if (!std::isfinite(c)) throw std::invalid_argument("tangent vector: non-finite component");
  }

  std::vector<double> comps_;
};

/// Sorted multi-indices of a degree-k basis over N coordinates, as bitmasks.
class FormBasis {
 public:
  static const FormBasis& get(int ncoords, int degree) {
    if (ncoords < 1 || ncoords > kMaxCoords || degree < 0 || degree > ncoords)
      throw std::out_of_range("form basis: unsupported (ncoords, degree)");
    static std::array<std::array<std::once_flag, kMaxCoords + 1>, kMaxCoords + 1> flags;
    static std::array<std::array<std::unique_ptr<FormBasis>, kMaxCoords + 1>, kMaxCoords + 1> cache;
    std::call_once(flags[ncoords][degree], [&] { cache[ncoords][degree].reset(new FormBasis(ncoords, degree)); });
    return *cache[ncoords][degree];
  }

  int ncoords() const { return ncoords_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(masks_.size()); }
  unsigned mask(int b) const { return masks_[b]; }
  const std::vector<int>& indices(int b) const { return indices_[b]; }
  int index_of(unsigned mask) const { return lookup_[mask]; }

 private:
  FormBasis(int ncoords, int degree) : ncoords_(ncoords), degree_(degree) {
    lookup_.assign(1u << ncoords, -1);
    // Lexicographic order of sorted index tuples.
    std::vector<int> idx(degree);
    std::function<void(int, int)> rec = [&](int pos, int start) {
      if (pos == degree) {
        unsigned m = 0;
        for (int i : idx) m |= 1u << i;
        lookup_[m] = static_cast<int>(masks_.size());
        masks_.push_back(m);
        indices_.push_back(idx);
        return;
      }
      for (int i = start; i < ncoords; ++i) {
        idx[pos] = i;
        rec(pos + 1, i + 1);
      }
    };
    rec(0, 0);
  }

  int ncoords_;
  int degree_;
  std::vector<unsigned> masks_;
  std::vector<std::vector<int>> indices_;
  std::vector<int> lookup_;
};

namespace detail {

/// Number of set bits of mask strictly below bit i.
inline int bits_below(unsigned mask, int i) { return std::popcount(mask & ((1u << i) - 1u)); }

inline int wedge_sign(unsigned a, unsigned b) {
  int inversions = 0;
  for (int i = 0; i < kMaxCoords; ++i)
    if (a & (1u << i)) inversions += std::popcount(b & ((1u << i) - 1u));
  return (inversions % 2) ? -1 : 1;
}

inline std::vector<Jet> seed_jets(std::span<const double> coords, int order) {
  const int n = static_cast<int>(coords.size());
  std::vector<Jet> jets;
  jets.reserve(n);
  for (int i = 0; i < n; ++i) jets.push_back(Jet::variable(coords[i], i, n, order));
  return jets;
}

/// Evaluates an expression on extended coordinates in Jet arithmetic.
inline Jet eval_on_coords(const Expr& e, std::span<const Jet> jets) {
  return eval_as<Jet>(e, jets.first(jets.size() - 1), jets.back());
}

inline void check_expr_fits(const Expr& e, int ncoords) {
  if (e.max_slot() >= ncoords - 1)
    throw std::invalid_argument("expression references x" + std::to_string(e.max_slot() + 1) +
                                " beyond phase-space dimension " + std::to_string(ncoords - 1));
}

inline double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

}  // namespace detail

enum class Provenance { analytic, numeric };

/// Coefficient field of a k-form on extended phase space.
class DifferentialForm {
 public:
  using JetFn = std::function<void(std::span<const double> coords, int order, std::span<Jet> out)>;
  using ValueFn = std::function<void(std::span<const double> coords, std::span<double> out)>;

  static DifferentialForm analytic(int ncoords, int degree, JetFn fn) {
    DifferentialForm f(ncoords, degree);
    f.jet_fn_ = std::make_shared<const JetFn>(std::move(fn));
    return f;
  }

  static DifferentialForm numeric(int ncoords, int degree, ValueFn fn) {
    DifferentialForm f(ncoords, degree);
    f.value_fn_ = std::make_shared<const ValueFn>(std::move(fn));
    return f;
  }

  static DifferentialForm zero(int ncoords, int degree) {
    return analytic(ncoords, degree, [](std::span<const double>, int, std::span<Jet> out) {
      for (Jet& j : out) j = Jet(0.0);
    });
  }

  /// 0-form backed by an expression.
  static DifferentialForm scalar(int ncoords, Expr e) {
    detail::check_expr_fits(e, ncoords);
    return analytic(ncoords, 0, [e = std::move(e)](std::span<const double> coords, int order, std::span<Jet> out) {
      const auto jets = detail::seed_jets(coords, order);
      out[0] = detail::eval_on_coords(e, jets);
    });
  }

  static DifferentialForm constant_scalar(int ncoords, double v) { return scalar(ncoords, Expr::constant(v)); }

  /// dx_i; i = ncoords - 1 is dt.
  static DifferentialForm differential(int ncoords, int i) {
    if (i < 0 || i >= ncoords) throw std::out_of_range("differential: coordinate index");
    const int idx = FormBasis::get(ncoords, 1).index_of(1u << i);
    return analytic(ncoords, 1, [idx](std::span<const double>, int, std::span<Jet> out) {
      for (Jet& j : out) j = Jet(0.0);
      out[idx] = Jet(1.0);
    });
  }

  struct Term {
    Expr coefficient;
    std::vector<int> indices;  // coordinate indices, any order
  };

  /// Sum of coefficient * dx_{i1} ^ ... ^ dx_{ik}. Unsorted indices are
  /// sorted with the permutation sign; repeated indices drop the term.
  static DifferentialForm from_terms(int ncoords, int degree, std::vector<Term> terms) {
    const FormBasis& basis = FormBasis::get(ncoords, degree);
    struct Resolved {
      Expr coefficient;
      int slot;
      double sign;
    };
    std::vector<Resolved> resolved;
    for (auto& term : terms) {
      if (static_cast<int>(term.indices.size()) != degree) throw std::invalid_argument("from_terms: degree mismatch");
      detail::check_expr_fits(term.coefficient, ncoords);
      std::vector<int> idx = term.indices;
      int swaps = 0;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j + 1 < idx.size() - i; ++j)
          if (idx[j] > idx[j + 1]) {
            std::swap(idx[j], idx[j + 1]);
            ++swaps;
          }
      unsigned mask = 0;
      bool repeated = false;
      for (int i : idx) {
        if (i < 0 || i >= ncoords) throw std::out_of_range("from_terms: coordinate index");
        if (mask & (1u << i)) repeated = true;
        mask |= 1u << i;
      }
      if (repeated) continue;
      resolved.push_back({std::move(term.coefficient), basis.index_of(mask), (swaps % 2) ? -1.0 : 1.0});
    }
    return analytic(ncoords, degree,
                    [resolved = std::move(resolved)](std::span<const double> coords, int order, std::span<Jet> out) {
                      for (Jet& j : out) j = Jet(0.0);
                      const auto jets = detail::seed_jets(coords, order);
                      for (const auto& r : resolved) {
                        Jet c = detail::eval_on_coords(r.coefficient, jets);
                        c *= r.sign;
                        out[r.slot] += c;
                      }
                    });
  }

  int ncoords() const { return ncoords_; }
  int degree() const { return degree_; }
  int size() const { return basis().size(); }
  const FormBasis& basis() const { return FormBasis::get(ncoords_, degree_); }
  Provenance provenance() const { return jet_fn_ ? Provenance::analytic : Provenance::numeric; }
  bool is_analytic() const { return static_cast<bool>(jet_fn_); }

  void coefficients(std::span<const double> coords, std::span<double> out) const {
    check_coords(coords);
    if (jet_fn_) {
      std::vector<Jet> jets(size());
      (*jet_fn_)(coords, 0, jets);
      for (int i = 0; i < size(); ++i) out[i] = jets[i].value();
    } else {
      (*value_fn_)(coords, out);
    }
  }

  std::vector<double> coefficients(std::span<const double> coords) const {
    std::vector<double> out(size());
    coefficients(coords, out);
    return out;
  }

  /// Coefficients as Taylor jets of the given order (analytic forms only).
  std::vector<Jet> coefficient_jets(std::span<const double> coords, int order) const {
    if (!jet_fn_) throw std::logic_error("coefficient jets requested from a numeric form");
    check_coords(coords);
    std::vector<Jet> jets(size());
    (*jet_fn_)(coords, order, jets);
    return jets;
  }

  /// Coefficient of dx_{i1} ^ ... ^ dx_{ik} for sorted indices.
  double coefficient(std::span<const double> coords, std::initializer_list<int> sorted_indices) const {
    unsigned mask = 0;
    for (int i : sorted_indices) mask |= 1u << i;
    return coefficients(coords)[basis().index_of(mask)];
  }

 private:
  DifferentialForm(int ncoords, int degree) : ncoords_(ncoords), degree_(degree) {
    if (ncoords < 3 || ncoords > kMaxCoords) throw std::invalid_argument("form: ncoords must be in [3, 7]");
    if (degree < 0 || degree > ncoords) throw std::invalid_argument("form: degree out of range");
  }

  void check_coords(std::span<const double> coords) const {
    if (static_cast<int>(coords.size()) != ncoords_) throw std::invalid_argument("form: point dimension mismatch");
  }

  int ncoords_;
  int degree_;
  std::shared_ptr<const JetFn> jet_fn_;
  std::shared_ptr<const ValueFn> value_fn_;
};

/// Vector field on extended phase space; last component is along dt.
class VectorField {
 public:
  using JetFn = std::function<void(std::span<const double> coords, int order, std::span<Jet> out)>;
  using ValueFn = std::function<void(std::span<const double> coords, std::span<double> out)>;

  static VectorField analytic(int ncoords, JetFn fn) {
    VectorField v(ncoords);
    v.jet_fn_ = std::make_shared<const JetFn>(std::move(fn));
    return v;
  }

  static VectorField numeric(int ncoords, ValueFn fn) {
    VectorField v(ncoords);
    v.value_fn_ = std::make_shared<const ValueFn>(std::move(fn));
    return v;
  }

  /// One expression per extended coordinate, time component last.
  static VectorField from_exprs(std::vector<Expr> components) {
    const int n = static_cast<int>(components.size());
    for (const auto& e : components) detail::check_expr_fits(e, n);
    return analytic(n, [components = std::move(components)](std::span<const double> coords, int order,
                                                            std::span<Jet> out) {
      const auto jets = detail::seed_jets(coords, order);
      for (std::size_t i = 0; i < components.size(); ++i) out[i] = detail::eval_on_coords(components[i], jets);
    });
  }

  static VectorField constant(const TangentVector& v) {
    std::vector<double> c(v.components().begin(), v.components().end());
    return analytic(v.ncoords(), [c](std::span<const double>, int, std::span<Jet> out) {
      for (std::size_t i = 0; i < c.size(); ++i) out[i] = Jet(c[i]);
    });
  }

  static VectorField zero(int ncoords) {
    return analytic(ncoords, [](std::span<const double>, int, std::span<Jet> out) {
      for (Jet& j : out) j = Jet(0.0);
    });
  }

  /// d/dx_i as a constant field.
  static VectorField coordinate(int ncoords, int i) { return constant(TangentVector::basis(ncoords, i)); }

  int ncoords() const { return ncoords_; }
  bool is_analytic() const { return static_cast<bool>(jet_fn_); }

  void components(std::span<const double> coords, std::span<double> out) const {
    if (jet_fn_) {
      std::vector<Jet> jets(ncoords_);
      (*jet_fn_)(coords, 0, jets);
      for (int i = 0; i < ncoords_; ++i) out[i] = jets[i].value();
    } else {
      (*value_fn_)(coords, out);
    }
  }

  std::vector<double> components(std::span<const double> coords) const {
    std::vector<double> out(ncoords_);
    components(coords, out);
    return out;
  }

  std::vector<Jet> component_jets(std::span<const double> coords, int order) const {
    if (!jet_fn_) throw std::logic_error("component jets requested from a numeric vector field");
    std::vector<Jet> jets(ncoords_);
    (*jet_fn_)(coords, order, jets);
    return jets;
  }

  TangentVector at(const ExtendedPoint& p) const { return TangentVector::from_components(components(p.coords())); }

  friend VectorField operator+(const VectorField& a, const VectorField& b) { return combine(1.0, a, 1.0, b); }
  friend VectorField operator-(const VectorField& a, const VectorField& b) { return combine(1.0, a, -1.0, b); }
  friend VectorField operator*(double s, const VectorField& a) { return combine(s, a, 0.0, zero(a.ncoords())); }

  /// s a + r b, evaluated componentwise.
  static VectorField combine(double s, const VectorField& a, double r, const VectorField& b) {
    if (a.ncoords_ != b.ncoords_) throw std::invalid_argument("vector field dimension mismatch");
    if (a.is_analytic() && b.is_analytic()) {
      return analytic(a.ncoords_, [=](std::span<const double> coords, int order, std::span<Jet> out) {
        const auto ja = a.component_jets(coords, order);
        const auto jb = b.component_jets(coords, order);
        for (std::size_t i = 0; i < out.size(); ++i) {
          Jet x = ja[i];
          x *= s;
          Jet y = jb[i];
          y *= r;
          out[i] = x + y;
        }
      });
    }
    return numeric(a.ncoords_, [=](std::span<const double> coords, std::span<double> out) {
      const auto va = a.components(coords);
      const auto vb = b.components(coords);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * va[i] + r * vb[i];
    });
  }

 private:
  explicit VectorField(int ncoords) : ncoords_(ncoords) {
    if (ncoords < 3 || ncoords > kMaxCoords) throw std::invalid_argument("vector field: ncoords must be in [3, 7]");
  }

  int ncoords_;
  std::shared_ptr<const JetFn> jet_fn_;
  std::shared_ptr<const ValueFn> value_fn_;
};

// ---------------------------------------------------------------------------
// Algebra
// ---------------------------------------------------------------------------

namespace detail {

inline double small_det(int k, const std::array<double, kMaxCoords * kMaxCoords>& m) {
  switch (k) {
    case 0: return 1.0;
    case 1: return m[0];
    case 2: return m[0] * m[1 * kMaxCoords + 1] - m[1] * m[1 * kMaxCoords];
    default: {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxCoords, kMaxCoords> a(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) a(r, c) = m[r * kMaxCoords + c];
      return a.determinant();
    }
  }
}

}  // namespace detail

/// sum_I c_I det[v_j^{i_r}] for coefficients over the given basis.
inline double contract(const FormBasis& basis, std::span<const double> coeffs,
                       std::span<const std::span<const double>> vectors) {
  const int k = basis.degree();
  double total = 0.0;
  std::array<double, kMaxCoords * kMaxCoords> m{};
  for (int b = 0; b < basis.size(); ++b) {
    if (coeffs[b] == 0.0) continue;
    const auto& idx = basis.indices(b);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) m[r * kMaxCoords + c] = vectors[c][idx[r]];
    total += coeffs[b] * detail::small_det(k, m);
  }
  return total;
}

/// alpha_p(v_1, ..., v_k).
inline double evaluate(const DifferentialForm& alpha, const ExtendedPoint& p, std::span<const TangentVector> vs) {
  if (static_cast<int>(vs.size()) != alpha.degree())
    throw std::invalid_argument("evaluate: expected " + std::to_string(alpha.degree()) + " vectors, got " +
                                std::to_string(vs.size()));
  if (p.ncoords() != alpha.ncoords()) throw std::invalid_argument("evaluate: point dimension mismatch");
  std::vector<std::span<const double>> vecs;
  for (const auto& v : vs) {
    if (v.ncoords() != alpha.ncoords()) throw std::invalid_argument("evaluate: vector dimension mismatch");
    vecs.push_back(v.components());
  }
  const auto coeffs = alpha.coefficients(p.coords());
  return contract(alpha.basis(), coeffs, vecs);
}

inline double evaluate(const DifferentialForm& alpha, const ExtendedPoint& p,
                       std::initializer_list<TangentVector> vs) {
  return evaluate(alpha, p, std::span<const TangentVector>(vs.begin(), vs.size()));
}

namespace detail {

template <class S>
void wedge_kernel(const FormBasis& ba, std::span<const S> a, const FormBasis& bb, std::span<const S> b,
                  const FormBasis& out_basis, std::span<S> out) {
  for (auto& o : out) o = S(0.0);
  for (int i = 0; i < ba.size(); ++i) {
    for (int j = 0; j < bb.size(); ++j) {
      const unsigned mi = ba.mask(i), mj = bb.mask(j);
      if (mi & mj) continue;
      S term = a[i] * b[j];
      if (wedge_sign(mi, mj) < 0) term = -term;
      out[out_basis.index_of(mi | mj)] += term;
    }
  }
}

template <class S>
void interior_kernel(std::span<const S> v, const FormBasis& ba, std::span<const S> a, const FormBasis& out_basis,
                     std::span<S> out) {
  for (auto& o : out) o = S(0.0);
  const int n = ba.ncoords();
  for (int j = 0; j < out_basis.size(); ++j) {
    const unsigned mj = out_basis.mask(j);
    for (int i = 0; i < n; ++i) {
      if (mj & (1u << i)) continue;
      S term = v[i] * a[ba.index_of(mj | (1u << i))];
      if (bits_below(mj, i) % 2) term = -term;
      out[j] += term;
    }
  }
}

template <class S>
void linear_kernel(double s, std::span<const S> a, double r, std::span<const S> b, std::span<S> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    S x = a[i];
    x *= s;
    S y = b[i];
    y *= r;
    out[i] = x + y;
  }
}

inline void check_same_space(const DifferentialForm& a, const DifferentialForm& b) {
  if (a.ncoords() != b.ncoords()) throw std::invalid_argument("forms live on different spaces");
}

}  // namespace detail

/// s a + r b.
inline DifferentialForm linear_combination(double s, const DifferentialForm& a, double r, const DifferentialForm& b) {
  detail::check_same_space(a, b);
  if (a.degree() != b.degree()) throw std::invalid_argument("adding forms of different degree");
  if (a.is_analytic() && b.is_analytic()) {
    return DifferentialForm::analytic(a.ncoords(), a.degree(),
                                      [=](std::span<const double> coords, int order, std::span<Jet> out) {
                                        const auto ja = a.coefficient_jets(coords, order);
                                        const auto jb = b.coefficient_jets(coords, order);
                                        detail::linear_kernel<Jet>(s, ja, r, jb, out);
                                      });
  }
  return DifferentialForm::numeric(a.ncoords(), a.degree(), [=](std::span<const double> coords, std::span<double> out) {
    const auto va = a.coefficients(coords);
    const auto vb = b.coefficients(coords);
    detail::linear_kernel<double>(s, va, r, vb, out);
  });
}

inline DifferentialForm operator+(const DifferentialForm& a, const DifferentialForm& b) {
  return linear_combination(1.0, a, 1.0, b);
}
inline DifferentialForm operator-(const DifferentialForm& a, const DifferentialForm& b) {
  return linear_combination(1.0, a, -1.0, b);
}
inline DifferentialForm operator*(double s, const DifferentialForm& a) {
  return linear_combination(s, a, 0.0, DifferentialForm::zero(a.ncoords(), a.degree()));
}
inline DifferentialForm operator-(const DifferentialForm& a) { return -1.0 * a; }

inline DifferentialForm wedge(const DifferentialForm& a, const DifferentialForm& b) {
  detail::check_same_space(a, b);
  const int k = a.degree() + b.degree();
  if (k > a.ncoords())
    throw std::invalid_argument("wedge: degree " + std::to_string(k) + " exceeds " + std::to_string(a.ncoords()));
  const int n = a.ncoords();
  if (a.is_analytic() && b.is_analytic()) {
    return DifferentialForm::analytic(n, k, [=](std::span<const double> coords, int order, std::span<Jet> out) {
      const auto ja = a.coefficient_jets(coords, order);
      const auto jb = b.coefficient_jets(coords, order);
      detail::wedge_kernel<Jet>(a.basis(), ja, b.basis(), jb, FormBasis::get(n, k), out);
    });
  }
  return DifferentialForm::numeric(n, k, [=](std::span<const double> coords, std::span<double> out) {
    const auto va = a.coefficients(coords);
    const auto vb = b.coefficients(coords);
    detail::wedge_kernel<double>(a.basis(), va, b.basis(), vb, FormBasis::get(n, k), out);
  });
}

/// i_v alpha.
inline DifferentialForm interior(const VectorField& v, const DifferentialForm& alpha) {
  if (alpha.degree() < 1) throw std::invalid_argument("interior product of a 0-form");
  if (v.ncoords() != alpha.ncoords()) throw std::invalid_argument("interior: dimension mismatch");
  const int n = alpha.ncoords(), k = alpha.degree() - 1;
  if (v.is_analytic() && alpha.is_analytic()) {
    return DifferentialForm::analytic(n, k, [=](std::span<const double> coords, int order, std::span<Jet> out) {
      const auto jv = v.component_jets(coords, order);
      const auto ja = alpha.coefficient_jets(coords, order);
      detail::interior_kernel<Jet>(jv, alpha.basis(), ja, FormBasis::get(n, k), out);
    });
  }
  return DifferentialForm::numeric(n, k, [=](std::span<const double> coords, std::span<double> out) {
    const auto vv = v.components(coords);
    const auto va = alpha.coefficients(coords);
    detail::interior_kernel<double>(vv, alpha.basis(), va, FormBasis::get(n, k), out);
  });
}

/// d alpha. Exact for analytic forms; central differences with step
/// 1e-5 max(1, |x_i|) otherwise.
inline DifferentialForm exterior_derivative(const DifferentialForm& alpha) {
  const int n = alpha.ncoords(), k = alpha.degree() + 1;
  if (k > n) throw std::invalid_argument("exterior derivative of a top-degree form");
  const FormBasis& in = alpha.basis();
  const FormBasis& outb = FormBasis::get(n, k);
  if (alpha.is_analytic()) {
    return DifferentialForm::analytic(n, k, [=, &in, &outb](std::span<const double> coords, int order,
                                                            std::span<Jet> out) {
      const auto ja = alpha.coefficient_jets(coords, order + 1);
      for (int K = 0; K < outb.size(); ++K) {
        Jet acc(0.0);
        const unsigned mk = outb.mask(K);
        for (int i : outb.indices(K)) {
          const unsigned rest = mk & ~(1u << i);
          Jet term = ja[in.index_of(rest)].derivative(i);
          if (detail::bits_below(mk, i) % 2) term = -term;
          acc += term;
        }
        out[K] = acc;
      }
    });
  }
  return DifferentialForm::numeric(n, k, [=, &in, &outb](std::span<const double> coords, std::span<double> out) {
    // partial[i][b] = d alpha_b / d x_i
    std::vector<std::vector<double>> partial(n);
    std::vector<double> shifted(coords.begin(), coords.end());
    for (int i = 0; i < n; ++i) {
      const double h = detail::fd_step(coords[i]);
      shifted[i] = coords[i] + h;
      const auto plus = alpha.coefficients(shifted);
      shifted[i] = coords[i] - h;
      const auto minus = alpha.coefficients(shifted);
      shifted[i] = coords[i];
      partial[i].resize(in.size());
      for (int b = 0; b < in.size(); ++b) partial[i][b] = (plus[b] - minus[b]) / (2.0 * h);
    }
    for (int K = 0; K < outb.size(); ++K) {
      double acc = 0.0;
      const unsigned mk = outb.mask(K);
      for (int i : outb.indices(K)) {
        const double term = partial[i][in.index_of(mk & ~(1u << i))];
        acc += (detail::bits_below(mk, i) % 2) ? -term : term;
      }
      out[K] = acc;
    }
  });
}

/// L_xi alpha = i_xi d alpha + d i_xi alpha.
inline DifferentialForm lie_derivative(const VectorField& xi, const DifferentialForm& alpha) {
  const int n = alpha.ncoords(), k = alpha.degree();
  DifferentialForm result = DifferentialForm::zero(n, k);
  if (k < n) result = result + interior(xi, exterior_derivative(alpha));
  if (k > 0) result = result + exterior_derivative(interior(xi, alpha));
  return result;
}

/// Image of coords under the flow of xi for parameter s (RK4, 16 substeps).
inline std::vector<double> flow_along(const VectorField& xi, std::span<const double> coords, double s) {
  std::vector<double> y(coords.begin(), coords.end());
  if (s == 0.0) return y;
  const ode::Rhs rhs = [&xi](double, std::span<const double> state, std::span<double> dy) {
    xi.components(state, dy);
  };
  constexpr int substeps = 16;
  const double h = s / substeps;
  for (int i = 0; i < substeps; ++i) {
    ode::rk4_step(rhs, i * h, y, h);
    for (double c : y)
      if (!std::isfinite(c)) throw std::runtime_error("flow step failure: non-finite state");
  }
  return y;
}

/// Estimate of (L_xi alpha)_p(vs) from pullbacks along the xi-flow. The
/// central quotient D(e) = (Phi_e^* alpha - Phi_{-e}^* alpha)(p; vs) / (2 e)
/// is Richardson-combined over e = eps and eps/2. Push-forwards of vs use
/// central differences of the flow map.
inline double lie_derivative_flow_check(const VectorField& xi, const DifferentialForm& alpha, const ExtendedPoint& p,
                                        std::span<const TangentVector> vs, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("lie_derivative_flow_check: eps must be positive");
  if (static_cast<int>(vs.size()) != alpha.degree()) throw std::invalid_argument("lie_derivative_flow_check: arity");
  const int n = alpha.ncoords();
  double scale = 1.0;
  for (double c : p.coords()) scale = std::max(scale, std::abs(c));
  const double delta = 1e-5 * scale;

  auto pullback = [&](double s) {
    const auto image = flow_along(xi, p.coords(), s);
    std::vector<std::vector<double>> pushed;
    std::vector<double> plus(n), minus(n);
    for (const auto& v : vs) {
      for (int i = 0; i < n; ++i) {
        plus[i] = p.coords()[i] + delta * v.components()[i];
        minus[i] = p.coords()[i] - delta * v.components()[i];
      }
      const auto fp = flow_along(xi, plus, s);
      const auto fm = flow_along(xi, minus, s);
      std::vector<double> w(n);
      for (int i = 0; i < n; ++i) w[i] = (fp[i] - fm[i]) / (2.0 * delta);
      pushed.push_back(std::move(w));
    }
    std::vector<std::span<const double>> spans(pushed.begin(), pushed.end());
    return contract(alpha.basis(), alpha.coefficients(image), spans);
  };
  const auto central = [&](double e) { return (pullback(e) - pullback(-e)) / (2.0 * e); };
  return (4.0 * central(0.5 * eps) - central(eps)) / 3.0;
}

}  // namespace nambu
