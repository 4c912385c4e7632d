#pragma once

// Reading scenario configurations. Every accessor carries the JSON path of
// the value it reads, so validation failures name the offending field.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nambu/chain.hpp"
#include "nambu/flow.hpp"
#include "nambu/hamiltonian.hpp"
#include "nambu/nambu_system.hpp"
#include "nambu/sampling.hpp"
#include "nambu/symmetry.hpp"

namespace nambu {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A value inside the configuration together with its path ("$.system.name").
class ConfigNode {
 public:
  ConfigNode(const Json& value, std::string path) : v_(&value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const Json& raw() const { return *v_; }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }

  /// Requires an object whose keys all come from `allowed`.
  const ConfigNode& expect_object(const std::vector<std::string_view>& allowed) const {
    if (!v_->is_object()) fail("expected an object");
    for (const auto& [key, value] : v_->items()) {
      bool known = false;
      for (auto a : allowed) known = known || key == a;
      if (!known) throw ConfigError(path_ + "." + key, "unknown key");
    }
    return *this;
  }

  bool has(std::string_view key) const { return v_->is_object() && v_->contains(key); }

  ConfigNode child(std::string_view key) const {
    if (!v_->is_object()) fail("expected an object");
    auto it = v_->find(key);
    if (it == v_->end()) throw ConfigError(path_ + "." + std::string(key), "missing required field");
    return ConfigNode(*it, path_ + "." + std::string(key));
  }

  std::optional<ConfigNode> optional_child(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  std::size_t size() const {
    if (!v_->is_array()) fail("expected an array");
    return v_->size();
  }

  ConfigNode at(std::size_t i) const {
    if (!v_->is_array()) fail("expected an array");
    return ConfigNode((*v_)[i], path_ + "[" + std::to_string(i) + "]");
  }

  double number() const {
    if (!v_->is_number()) fail("expected a number");
    const double d = v_->get<double>();
    if (!std::isfinite(d)) fail("expected a finite number");
    return d;
  }

  long integer() const {
    if (!v_->is_number_integer()) fail("expected an integer");
    return v_->get<long>();
  }

  bool boolean() const {
    if (!v_->is_boolean()) fail("expected true or false");
    return v_->get<bool>();
  }

  std::string string() const {
    if (!v_->is_string()) fail("expected a string");
    return v_->get<std::string>();
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
    return out;
  }

  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).string());
    return out;
  }

  double number_or(std::string_view key, double fallback) const { return has(key) ? child(key).number() : fallback; }
  long integer_or(std::string_view key, long fallback) const { return has(key) ? child(key).integer() : fallback; }
  bool boolean_or(std::string_view key, bool fallback) const { return has(key) ? child(key).boolean() : fallback; }
  std::string string_or(std::string_view key, std::string fallback) const {
    return has(key) ? child(key).string() : std::move(fallback);
  }

  double positive(std::string_view key, double fallback) const {
    const double v = number_or(key, fallback);
    if (!(v > 0.0)) child(key).fail("must be positive");
    return v;
  }

  /// A number, or a string holding a constant expression such as "pi/2".
  double constant() const {
    if (v_->is_number()) return number();
    const std::string src = string();
    try {
      const Expr e = parse(src, VariableScheme::parameters({}));
      return eval(e, std::vector<double>{});
    } catch (const ExprError& e) {
      fail(std::string("bad constant expression: ") + e.what());
    }
  }

 private:
  const Json* v_;
  std::string path_;
};

/// Runs `f`, re-throwing library argument and parse errors as ConfigError at `node`.
template <class F>
auto at_path(const ConfigNode& node, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const ExprError& e) {
    node.fail(e.what());
  } catch (const std::invalid_argument& e) {
    node.fail(e.what());
  } catch (const std::out_of_range& e) {
    node.fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// System
// ---------------------------------------------------------------------------

class ScenarioSystem {
 public:
  explicit ScenarioSystem(NambuSystem s) : sys_(std::move(s)) {}
  explicit ScenarioSystem(HamiltonianSystem s) : sys_(std::move(s)) {}

  bool is_nambu() const { return std::holds_alternative<NambuSystem>(sys_); }
  const NambuSystem& nambu() const { return std::get<NambuSystem>(sys_); }
  const HamiltonianSystem& hamiltonian() const { return std::get<HamiltonianSystem>(sys_); }

  std::string kind() const { return is_nambu() ? "nambu" : "hamiltonian"; }
  int dim() const { return is_nambu() ? nambu().dim() : hamiltonian().dim(); }
  int ncoords() const { return dim() + 1; }
  std::string label() const { return is_nambu() ? nambu().label() : hamiltonian().label(); }
  double region_half_width() const {
    return is_nambu() ? nambu().region_half_width() : hamiltonian().region_half_width();
  }
  VariableScheme scheme() const {
    return is_nambu() ? VariableScheme::phase_space() : VariableScheme::canonical(hamiltonian().dof());
  }
  Dynamics dynamics() const { return is_nambu() ? nambu_dynamics(nambu()) : hamiltonian_dynamics(hamiltonian()); }

  /// The functions whose conservation `simulate` reports: the Nambu
  /// Hamiltonians, or H itself.
  std::vector<Expr> conserved_candidates() const {
    if (is_nambu()) return nambu().hamiltonians();
    return {hamiltonian().hamiltonian()};
  }

 private:
  std::variant<NambuSystem, HamiltonianSystem> sys_;
};

inline ScenarioSystem read_system(const ConfigNode& node) {
  node.expect_object({"kind", "builtin", "params", "hamiltonians", "hamiltonian", "dof", "label", "dimension",
                      "region_half_width"});
  const std::string kind = node.child("kind").string();
  const double region = node.positive("region_half_width", kDefaultRegionHalfWidth);
  std::optional<ScenarioSystem> out;
  if (kind == "nambu") {
    for (auto k : {"hamiltonian", "dof"})
      if (node.has(k)) node.child(k).fail("not used by nambu systems");
    if (node.has("builtin") && node.has("hamiltonians")) node.fail("give either 'builtin' or 'hamiltonians', not both");
    if (node.has("builtin")) {
      SystemParams params;
      if (auto p = node.optional_child("params")) {
        if (!p->raw().is_object()) p->fail("expected an object");
        for (const auto& [k, v] : p->raw().items()) params[k] = p->child(k).number();
      }
      const auto b = node.child("builtin");
      const NambuSystem base = at_path(b, [&] { return builtin_system(b.string(), params); });
      out.emplace(NambuSystem(base.hamiltonians(), node.string_or("label", base.label()), region));
    } else {
      if (node.has("params")) node.child("params").fail("only used with 'builtin'");
      const auto hs = node.child("hamiltonians");
      std::vector<Expr> exprs;
      for (std::size_t i = 0; i < hs.size(); ++i) {
        const auto h = hs.at(i);
        exprs.push_back(at_path(h, [&] { return parse(h.string()); }));
      }
      out.emplace(at_path(hs, [&] { return NambuSystem(std::move(exprs), node.string_or("label", "custom"), region); }));
    }
  } else if (kind == "hamiltonian") {
    for (auto k : {"builtin", "params", "hamiltonians"})
      if (node.has(k)) node.child(k).fail("not used by hamiltonian systems");
    const auto dof_node = node.child("dof");
    const long dof = dof_node.integer();
    if (dof < 1 || 2 * dof > kMaxSpatialSlots) dof_node.fail("dof must be 1, 2 or 3");
    const auto h = node.child("hamiltonian");
    const Expr e = at_path(h, [&] { return parse(h.string(), VariableScheme::canonical(static_cast<int>(dof))); });
    out.emplace(HamiltonianSystem(static_cast<int>(dof), e, node.string_or("label", "hamiltonian"), region));
  } else {
    node.child("kind").fail("expected \"nambu\" or \"hamiltonian\"");
  }
  if (auto d = node.optional_child("dimension"))
    if (d->integer() != out->dim())
      d->fail("declared dimension " + std::to_string(d->integer()) + " but the system has dimension " +
              std::to_string(out->dim()));
  return *out;
}

// ---------------------------------------------------------------------------
// Integrator and sampling
// ---------------------------------------------------------------------------

inline IntegratorParams read_integrator(const std::optional<ConfigNode>& node) {
  IntegratorParams p;
  if (!node) return p;
  node->expect_object({"method", "h", "rtol", "atol", "max_steps", "allow_backward"});
  const std::string method = node->string_or("method", "rk4");
  if (method == "rk4")
    p.method = Method::rk4_fixed;
  else if (method == "rk45")
    p.method = Method::rk45_adaptive;
  else
    node->child("method").fail("expected \"rk4\" or \"rk45\"");
  p.h = node->positive("h", p.h);
  p.rtol = node->positive("rtol", p.rtol);
  p.atol = node->positive("atol", p.atol);
  p.max_steps = node->integer_or("max_steps", p.max_steps);
  if (p.max_steps < 1) node->child("max_steps").fail("must be at least 1");
  p.allow_backward = node->boolean_or("allow_backward", false);
  return p;
}

struct SamplingSpec {
  SampleRegion region;
  std::optional<int> count;
};

inline SamplingSpec read_sampling(const std::optional<ConfigNode>& node, int n) {
  SamplingSpec s{SampleRegion::cube(n, 2.0), std::nullopt};
  if (!node) return s;
  node->expect_object({"count", "half_width", "lo", "hi", "t_range"});
  if (node->has("half_width") && (node->has("lo") || node->has("hi")))
    node->fail("give either 'half_width' or 'lo'/'hi'");
  if (node->has("half_width")) s.region = SampleRegion::cube(n, node->positive("half_width", 2.0));
  if (node->has("lo") || node->has("hi")) {
    s.region.lo = node->child("lo").numbers();
    s.region.hi = node->child("hi").numbers();
    if (static_cast<int>(s.region.lo.size()) != n) node->child("lo").fail("needs " + std::to_string(n) + " entries");
    if (static_cast<int>(s.region.hi.size()) != n) node->child("hi").fail("needs " + std::to_string(n) + " entries");
  }
  if (auto tr = node->optional_child("t_range")) {
    const auto t = tr->numbers();
    if (t.size() != 2) tr->fail("expected [t_lo, t_hi]");
    s.region.t_lo = t[0];
    s.region.t_hi = t[1];
  }
  at_path(*node, [&] { s.region.validate(); });
  if (auto c = node->optional_child("count")) {
    if (c->integer() < 1) c->fail("must be at least 1");
    s.count = static_cast<int>(c->integer());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

inline std::vector<double> read_csv_samples(const ConfigNode& node, const std::filesystem::path& file, int n) {
  std::ifstream in(file);
  if (!in) node.fail("cannot open '" + file.string() + "'");
  std::string line;
  if (!std::getline(in, line)) node.fail("'" + file.string() + "' is empty");
  std::vector<double> out;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        node.fail(file.filename().string() + " row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(vals.size()) != n + 1)
      node.fail(file.filename().string() + " row " + std::to_string(row) + ": expected an index column and " +
                std::to_string(n) + " coordinates");
    out.insert(out.end(), vals.begin() + 1, vals.end());
  }
  return out;
}

/// Parametric or CSV-backed chain. `count_override` replaces every axis count
/// (used by refinement ladders).
inline Chain read_geometry(const ConfigNode& node, int n, const std::filesystem::path& base_dir,
                           std::optional<int> count_override = std::nullopt) {
  node.expect_object({"axes", "coordinates", "time", "orientation", "csv", "counts"});
  const double time = node.number_or("time", 0.0);
  if (node.has("csv")) {
    for (auto k : {"axes", "coordinates", "orientation"})
      if (node.has(k)) node.child(k).fail("not used with 'csv'");
    if (count_override) node.fail("CSV geometry cannot be refined");
    const auto counts_node = node.child("counts");
    std::vector<int> counts;
    for (std::size_t a = 0; a < counts_node.size(); ++a) {
      const long c = counts_node.at(a).integer();
      if (c < kMinPeriodicSamples) counts_node.at(a).fail("periodic axes need at least 8 samples");
      counts.push_back(static_cast<int>(c));
    }
    const auto file = node.child("csv");
    const auto data = read_csv_samples(file, base_dir / file.string(), n);
    return at_path(node, [&] { return Cycle::from_samples(n, counts, data, time).chain(); });
  }
  if (node.has("counts")) node.child("counts").fail("only used with 'csv'");
  const auto axes_node = node.child("axes");
  if (axes_node.size() == 0) axes_node.fail("at least one axis is required");
  std::vector<GridAxis> axes;
  for (std::size_t a = 0; a < axes_node.size(); ++a) {
    const auto ax = axes_node.at(a);
    ax.expect_object({"name", "count", "range", "periodic"});
    const std::string name = ax.child("name").string();
    long count = ax.child("count").integer();
    if (count_override) count = *count_override;
    const bool periodic = ax.boolean_or("periodic", !ax.has("range"));
    if (periodic) {
      if (count < kMinPeriodicSamples) ax.child("count").fail("periodic axes need at least 8 samples");
      GridAxis g = GridAxis::periodic_axis(static_cast<int>(count), name);
      if (auto r = ax.optional_child("range")) {
        const auto v = r->numbers();
        if (v.size() != 2 || !(v[1] > v[0])) r->fail("expected [lo, hi] with lo < hi");
        g.lo = v[0];
        g.hi = v[1];
      }
      axes.push_back(g);
    } else {
      if (count < 2) ax.child("count").fail("bounded axes need at least 2 samples");
      const auto v = ax.child("range").numbers();
      if (v.size() != 2 || !(v[1] > v[0])) ax.child("range").fail("expected [lo, hi] with lo < hi");
      axes.push_back(GridAxis::bounded(static_cast<int>(count), v[0], v[1], name));
    }
  }
  const auto coords = node.child("coordinates");
  if (static_cast<int>(coords.size()) != n) coords.fail("needs " + std::to_string(n) + " expressions");
  std::vector<std::string> names;
  for (const auto& a : axes) names.push_back(a.name);
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto c = coords.at(i);
    at_path(c, [&] { return parse(c.string(), VariableScheme::parameters(names)); });
    sources.push_back(c.string());
  }
  const long orientation = node.integer_or("orientation", 1);
  if (orientation != 1 && orientation != -1) node.child("orientation").fail("expected 1 or -1");
  return at_path(node, [&] { return parametric_chain(axes, sources, time, static_cast<int>(orientation)); });
}

inline Cycle read_cycle(const ConfigNode& node, int n, const std::filesystem::path& base_dir,
                        std::optional<int> count_override = std::nullopt) {
  Chain c = read_geometry(node, n, base_dir, count_override);
  return at_path(node, [&] { return Cycle(std::move(c)); });
}

// ---------------------------------------------------------------------------
// Forms, fields and candidates
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::vector<int>>> read_terms(const ConfigNode& node, int degree, int nc,
                                                                        const VariableScheme& scheme) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (std::size_t k = 0; k < node.size(); ++k) {
    const auto t = node.at(k);
    t.expect_object({"coefficient", "indices"});
    const auto coef = t.child("coefficient");
    at_path(coef, [&] { return parse(coef.string(), scheme); });
    const auto idx_node = t.child("indices");
    std::vector<int> idx;
    for (std::size_t i = 0; i < idx_node.size(); ++i) {
      const long v = idx_node.at(i).integer();
      if (v < 0 || v >= nc) idx_node.at(i).fail("index out of range 0.." + std::to_string(nc - 1));
      idx.push_back(static_cast<int>(v));
    }
    if (static_cast<int>(idx.size()) != degree) idx_node.fail("a " + std::to_string(degree) + "-form needs " +
                                                              std::to_string(degree) + " indices per term");
    out.emplace_back(coef.string(), std::move(idx));
  }
  return out;
}

inline DifferentialForm read_form(const ConfigNode& node, int degree, int nc, const VariableScheme& scheme) {
  const auto terms = read_terms(node, degree, nc, scheme);
  std::vector<DifferentialForm::Term> parsed;
  for (const auto& [coef, idx] : terms) parsed.push_back({parse(coef, scheme), idx});
  return at_path(node, [&] { return DifferentialForm::from_terms(nc, degree, std::move(parsed)); });
}

/// Vector field from n spatial components, or n + 1 including the time component.
inline VectorField read_vector_field(const ConfigNode& node, const ScenarioSystem& sys) {
  const int n = sys.dim();
  if (static_cast<int>(node.size()) != n && static_cast<int>(node.size()) != n + 1)
    node.fail("needs " + std::to_string(n) + " or " + std::to_string(n + 1) + " components");
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const auto c = node.at(i);
    comps.push_back(at_path(c, [&] { return parse(c.string(), sys.scheme()); }));
  }
  if (static_cast<int>(comps.size()) == n) comps.push_back(Expr::constant(0.0));
  return VectorField::from_exprs(std::move(comps));
}

/// Nambu candidates take chi as a list of terms; Hamiltonian candidates as a scalar expression.
inline SymmetryCandidate read_candidate(const ConfigNode& node, const ScenarioSystem& sys,
                                        std::vector<std::string_view> extra_keys = {}) {
  extra_keys.insert(extra_keys.end(), {"label", "xi", "chi"});
  node.expect_object(extra_keys);
  const std::string label = node.string_or("label", "candidate");
  VectorField xi = read_vector_field(node.child("xi"), sys);
  const int nc = sys.ncoords();
  if (sys.is_nambu()) {
    DifferentialForm chi = DifferentialForm::zero(nc, sys.dim() - 2);
    if (auto c = node.optional_child("chi")) chi = read_form(*c, sys.dim() - 2, nc, sys.scheme());
    return {std::move(xi), std::move(chi), label};
  }
  DifferentialForm chi = DifferentialForm::constant_scalar(nc, 0.0);
  if (auto c = node.optional_child("chi"))
    chi = DifferentialForm::scalar(nc, at_path(*c, [&] { return parse(c->string(), sys.scheme()); }));
  return {std::move(xi), std::move(chi), label};
}

inline ExtendedPoint read_point(const ConfigNode& node, int n, double t) {
  const auto x = node.numbers();
  if (static_cast<int>(x.size()) != n) node.fail("needs " + std::to_string(n) + " coordinates");
  return ExtendedPoint(x, t);
}

inline std::vector<ExtendedPoint> read_points(const ConfigNode& node, int n, double t) {
  if (node.size() == 0) node.fail("at least one point is required");
  std::vector<ExtendedPoint> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read_point(node.at(i), n, t));
  return out;
}

/// Strictly increasing (or strictly decreasing) ladder of refinement values.
inline void check_ladder(const ConfigNode& node, const std::vector<double>& v, bool increasing) {
  if (v.size() < 2) node.fail("a refinement ladder needs at least 2 entries");
  for (std::size_t k = 1; k < v.size(); ++k)
    if (increasing ? !(v[k] > v[k - 1]) : !(v[k] < v[k - 1]))
      node.at(k).fail(std::string("non-monotone refinement ladder (entries must strictly ") +
                      (increasing ? "increase" : "decrease") + ")");
}

}  // namespace nambu
