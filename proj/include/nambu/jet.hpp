#pragma once

// Forward-mode automatic differentiation scalars.
//
// Dual carries a single directional derivative and backs Expr gradients.
// Jet is a truncated multivariate Taylor polynomial about a base point; it
// lets exterior derivatives of expression-backed forms nest (d of a form
// whose coefficients already contain first derivatives) without finite
// differences.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace nambu {

// ---------------------------------------------------------------------------
// Dual
// ---------------------------------------------------------------------------

struct Dual {
  double value = 0.0;
  double derivative = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double v, double d) : value(v), derivative(d) {}

  Dual& operator+=(const Dual& o) { value += o.value; derivative += o.derivative; return *this; }
  Dual& operator-=(const Dual& o) { value -= o.value; derivative -= o.derivative; return *this; }
  Dual& operator*=(const Dual& o) {
    derivative = derivative * o.value + value * o.derivative;
    value *= o.value;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    derivative = (derivative * o.value - value * o.derivative) / (o.value * o.value);
    value /= o.value;
    return *this;
  }
};

inline Dual operator-(const Dual& a) { return {-a.value, -a.derivative}; }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }

inline Dual sin(const Dual& a) { return {std::sin(a.value), std::cos(a.value) * a.derivative}; }
inline Dual cos(const Dual& a) { return {std::cos(a.value), -std::sin(a.value) * a.derivative}; }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.derivative};
}
inline Dual log(const Dual& a) { return {std::log(a.value), a.derivative / a.value}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return {s, a.derivative / (2.0 * s)};
}

// a^p for constant p.
inline Dual pow(const Dual& a, double p) {
  if (p == 0.0) return {1.0, 0.0};
  return {std::pow(a.value, p), p * std::pow(a.value, p - 1.0) * a.derivative};
}

inline Dual pow(const Dual& a, const Dual& b) {
  if (b.derivative == 0.0) return pow(a, b.value);
  const double v = std::pow(a.value, b.value);
  double d = v * b.derivative * std::log(a.value);
  if (a.derivative != 0.0) d += b.value * std::pow(a.value, b.value - 1.0) * a.derivative;
  return {v, d};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }

// ---------------------------------------------------------------------------
// Monomial tables for truncated Taylor arithmetic
// ---------------------------------------------------------------------------

inline constexpr int kMaxJetVars = 7;
inline constexpr int kMaxJetOrder = 5;

/// Graded enumeration of monomials of total degree <= order in nvars
/// variables. Index 0 is the constant term and index 1 + v is x_v.
class MonomialTable {
 public:
  struct Product {
    int a, b, c;
  };

  static const MonomialTable& get(int nvars, int order) {
    if (nvars < 1 || nvars > kMaxJetVars || order < 0 || order > kMaxJetOrder)
      throw std::out_of_range("jet table: unsupported (nvars, order)");
    static std::array<std::array<std::once_flag, kMaxJetOrder + 1>, kMaxJetVars + 1> flags;
    static std::array<std::array<std::unique_ptr<MonomialTable>, kMaxJetOrder + 1>, kMaxJetVars + 1> tables;
    std::call_once(flags[nvars][order], [&] {
      tables[nvars][order].reset(new MonomialTable(nvars, order));
    });
    return *tables[nvars][order];
  }

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  int degree(int idx) const { return degree_[idx]; }
  const std::array<std::uint8_t, kMaxJetVars>& exponents(int idx) const { return exponents_[idx]; }
  const std::vector<Product>& products() const { return products_; }

  /// Index of the monomial with the given exponents, or -1 if its degree
  /// exceeds the table order.
  int index_of(const std::array<std::uint8_t, kMaxJetVars>& e) const {
    auto it = lookup_.find(key(e));
    return it == lookup_.end() ? -1 : it->second;
  }

 private:
  MonomialTable(int nvars, int order) : nvars_(nvars), order_(order) {
    std::array<std::uint8_t, kMaxJetVars> e{};
    for (int d = 0; d <= order; ++d) enumerate(e, 0, d);
    for (int i = 0; i < size(); ++i) lookup_.emplace(key(exponents_[i]), i);
    for (int a = 0; a < size(); ++a) {
      for (int b = 0; b < size(); ++b) {
        if (degree_[a] + degree_[b] > order) continue;
        std::array<std::uint8_t, kMaxJetVars> s{};
        for (int v = 0; v < nvars; ++v) s[v] = exponents_[a][v] + exponents_[b][v];
        products_.push_back({a, b, lookup_.at(key(s))});
      }
    }
  }

  // Lexicographic with variable 0 varying slowest, so degree-1 monomials
  // come out as x_0, x_1, ... in order.
  void enumerate(std::array<std::uint8_t, kMaxJetVars>& e, int v, int remaining) {
    if (v == nvars_ - 1) {
      e[v] = static_cast<std::uint8_t>(remaining);
      exponents_.push_back(e);
      int d = 0;
      for (int i = 0; i < nvars_; ++i) d += e[i];
      degree_.push_back(d);
      e[v] = 0;
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[v] = static_cast<std::uint8_t>(k);
      enumerate(e, v + 1, remaining - k);
    }
    e[v] = 0;
  }

  static std::uint64_t key(const std::array<std::uint8_t, kMaxJetVars>& e) {
    std::uint64_t k = 0;
    for (int v = 0; v < kMaxJetVars; ++v) k = k * 16 + e[v];
    return k;
  }

  int nvars_;
  int order_;
  std::vector<std::array<std::uint8_t, kMaxJetVars>> exponents_;
  std::vector<int> degree_;
  std::map<std::uint64_t, int> lookup_;
  std::vector<Product> products_;
};

// ---------------------------------------------------------------------------
// Jet
// ---------------------------------------------------------------------------

/// Truncated Taylor polynomial f(x0 + h) = sum_a c_a h^a, |a| <= order.
/// A Jet without a table is a plain constant and broadcasts against any
/// other Jet.
class Jet {
 public:
  using Storage = boost::container::small_vector<double, 36>;

  Jet() : coeffs_(1, 0.0) {}
  Jet(double v) : coeffs_(1, v) {}  // NOLINT(google-explicit-constructor)

  static Jet constant(double v, int nvars, int order) {
    Jet j;
    j.table_ = &MonomialTable::get(nvars, order);
    j.coeffs_.assign(j.table_->size(), 0.0);
    j.coeffs_[0] = v;
    return j;
  }

  /// The coordinate function x_var seeded at value v.
  static Jet variable(double v, int var, int nvars, int order) {
    Jet j = constant(v, nvars, order);
    if (order >= 1) j.coeffs_[1 + var] = 1.0;
    return j;
  }

  double value() const { return coeffs_[0]; }
  bool is_constant() const { return table_ == nullptr; }
  int order() const { return table_ ? table_->order() : 0; }
  int nvars() const { return table_ ? table_->nvars() : 0; }
  const MonomialTable* table() const { return table_; }
  const Storage& coefficients() const { return coeffs_; }

  /// First partial derivative at the base point.
  double partial(int var) const {
    if (!table_ || table_->order() < 1) return 0.0;
    return coeffs_[1 + var];
  }

  /// Partial derivative with respect to x_var as a Jet one order lower.
  Jet derivative(int var) const {
    if (!table_ || table_->order() == 0) return Jet(0.0);
    const MonomialTable& lower = MonomialTable::get(table_->nvars(), table_->order() - 1);
    Jet out = constant(0.0, table_->nvars(), table_->order() - 1);
    for (int b = 0; b < lower.size(); ++b) {
      auto e = lower.exponents(b);
      const int k = e[var] + 1;
      e[var] = static_cast<std::uint8_t>(k);
      out.coeffs_[b] = k * coeffs_[table_->index_of(e)];
    }
    return out;
  }

  Jet& operator+=(const Jet& o) {
    if (o.table_ && !table_) promote(*o.table_);
    if (!o.table_) {
      coeffs_[0] += o.coeffs_[0];
    } else {
      check_compatible(o);
      for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    }
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    if (o.table_ && !table_) promote(*o.table_);
    if (!o.table_) {
      coeffs_[0] -= o.coeffs_[0];
    } else {
      check_compatible(o);
      for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    }
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& c : coeffs_) c *= s;
    return *this;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (!a.table_) return scaled(b, a.coeffs_[0]);
    if (!b.table_) return scaled(a, b.coeffs_[0]);
    a.check_compatible(b);
    Jet out = constant(0.0, a.nvars(), a.order());
    for (const auto& p : a.table_->products()) out.coeffs_[p.c] += a.coeffs_[p.a] * b.coeffs_[p.b];
    return out;
  }

  /// f(a) given taylor[k] = f^(k)(a0) / k!, for k = 0..order.
  static Jet compose(const Jet& a, const double* taylor) {
    if (!a.table_) return Jet(taylor[0]);
    Jet h = a;
    h.coeffs_[0] = 0.0;
    Jet out = constant(taylor[0], a.nvars(), a.order());
    Jet power = h;
    for (int k = 1; k <= a.order(); ++k) {
      if (k > 1) power = power * h;
      for (std::size_t i = 0; i < out.coeffs_.size(); ++i) out.coeffs_[i] += taylor[k] * power.coeffs_[i];
    }
    return out;
  }

 private:
  static Jet scaled(Jet j, double s) {
    j *= s;
    return j;
  }

  void promote(const MonomialTable& t) {
    const double v = coeffs_[0];
    table_ = &t;
    coeffs_.assign(t.size(), 0.0);
    coeffs_[0] = v;
  }

  void check_compatible(const Jet& o) const {
    if (table_ != o.table_) throw std::logic_error("jet arithmetic across different tables");
  }

  const MonomialTable* table_ = nullptr;
  Storage coeffs_;
};

inline Jet operator-(Jet a) {
  a *= -1.0;
  return a;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }

inline double value_of(const Jet& x) { return x.value(); }

namespace detail {

inline std::array<double, kMaxJetOrder + 1> power_taylor(double a0, double p, int order) {
  std::array<double, kMaxJetOrder + 1> t{};
  double binom = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) binom *= (p - (k - 1)) / k;
    t[k] = binom == 0.0 ? 0.0 : binom * std::pow(a0, p - k);
  }
  return t;
}

}  // namespace detail

inline Jet reciprocal(const Jet& a) {
  std::array<double, kMaxJetOrder + 1> t{};
  const double inv = 1.0 / a.value();
  double term = inv;
  for (int k = 0; k <= a.order(); ++k) {
    t[k] = term;
    term *= -inv;
  }
  return Jet::compose(a, t.data());
}

inline Jet operator/(const Jet& a, const Jet& b) {
  if (b.is_constant()) {
    Jet out = a;
    out *= 1.0 / b.value();
    return out;
  }
  return a * reciprocal(b);
}

inline Jet sin(const Jet& a) {
  std::array<double, kMaxJetOrder + 1> t{};
  const double s = std::sin(a.value()), c = std::cos(a.value());
  const double cyc[4] = {s, c, -s, -c};
  double fact = 1.0;
  for (int k = 0; k <= a.order(); ++k) {
    if (k > 0) fact *= k;
    t[k] = cyc[k % 4] / fact;
  }
  return Jet::compose(a, t.data());
}

inline Jet cos(const Jet& a) {
  std::array<double, kMaxJetOrder + 1> t{};
  const double s = std::sin(a.value()), c = std::cos(a.value());
  const double cyc[4] = {c, -s, -c, s};
  double fact = 1.0;
  for (int k = 0; k <= a.order(); ++k) {
    if (k > 0) fact *= k;
    t[k] = cyc[k % 4] / fact;
  }
  return Jet::compose(a, t.data());
}

inline Jet exp(const Jet& a) {
  std::array<double, kMaxJetOrder + 1> t{};
  const double e = std::exp(a.value());
  double fact = 1.0;
  for (int k = 0; k <= a.order(); ++k) {
    if (k > 0) fact *= k;
    t[k] = e / fact;
  }
  return Jet::compose(a, t.data());
}

inline Jet log(const Jet& a) {
  std::array<double, kMaxJetOrder + 1> t{};
  const double a0 = a.value();
  t[0] = std::log(a0);
  for (int k = 1; k <= a.order(); ++k) t[k] = ((k % 2) ? 1.0 : -1.0) / (k * std::pow(a0, k));
  return Jet::compose(a, t.data());
}

inline Jet pow(const Jet& a, double p) {
  const auto t = detail::power_taylor(a.value(), p, a.order());
  return Jet::compose(a, t.data());
}

inline Jet sqrt(const Jet& a) { return pow(a, 0.5); }

inline Jet pow(const Jet& a, const Jet& b) {
  bool const_exponent = true;
  for (std::size_t i = 1; i < b.coefficients().size(); ++i)
    if (b.coefficients()[i] != 0.0) const_exponent = false;
  if (const_exponent) return pow(a, b.value());
  return exp(b * log(a));
}

}  // namespace nambu
