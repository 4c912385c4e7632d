#pragma once

// Scenario runner behind the nambu-lab command line: validates a JSON
// configuration, executes one command, and assembles a report whose body is
// a pure function of the configuration and seed.

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nambu/action.hpp"
#include "nambu/config.hpp"
#include "nambu/hamiltonian.hpp"
#include "nambu/parallel.hpp"
#include "nambu/symmetry.hpp"

namespace nambu {

inline constexpr const char* kToolVersion = "1.0.0";

enum class ExitCode : int { pass = 0, tolerance_failure = 1, schema_violation = 2, numerical_failure = 3 };

inline const std::vector<std::string>& scenario_commands() {
  static const std::vector<std::string> c{"simulate", "check-dynamics", "check-liouville", "check-symmetry",
                                          "invariant", "momentum",       "action",          "convergence"};
  return c;
}

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

// ---------------------------------------------------------------------------
// Command specifications (validated before anything runs)
// ---------------------------------------------------------------------------

struct ExpectedValue {
  double value = 0.0;
  double tolerance = 0.0;
};

inline std::optional<ExpectedValue> read_expected(const std::optional<ConfigNode>& node) {
  if (!node) return std::nullopt;
  node->expect_object({"value", "tolerance"});
  return ExpectedValue{node->child("value").constant(), node->positive("tolerance", 1e-6)};
}

inline std::vector<double> read_epsilons(const ConfigNode& block) {
  if (!block.has("epsilons")) return {1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  const auto node = block.child("epsilons");
  auto eps = node.numbers();
  at_path(node, [&] { detail::check_epsilons(eps); });
  return eps;
}

struct SimulateSpec {
  std::vector<ExtendedPoint> starts;
  double t1 = 1.0;
  std::optional<double> conservation_tolerance;
};

struct SampleCheckSpec {
  double tolerance = 0.0;
  int samples = 100;
};

struct SymmetryCheckSpec {
  std::vector<std::pair<SymmetryCandidate, bool>> candidates;  // candidate, expected to pass
  double tolerance = kSymmetryTolerance;
  int samples = kSymmetrySamples;
};

struct InvariantSpec {
  SymmetryCandidate candidate;
  bool absolute = false;
  std::optional<Chain> geometry;
  std::vector<double> times;
  std::vector<ExtendedPoint> starts;
  double duration = 0.0;
  double drift_tolerance = 1e-6;
  std::optional<double> stokes_tolerance;
  std::optional<ExpectedValue> expected;
  bool estimate_integrator_error = true;
};

struct MomentumGenerator {
  std::string label;
  VectorField xi;
  DifferentialForm p;
};

struct ScalingSpec {
  VectorField xi;
  Expr p1, p2;
  std::vector<double> lambdas;
  double tolerance = 1e-12;
};

struct MomentumSpec {
  std::vector<MomentumGenerator> generators;
  double tolerance = kSymmetryTolerance;
  double drift_tolerance = 1e-9;
  std::vector<ExtendedPoint> starts;
  double duration = 0.0;
  std::vector<std::vector<double>> linearity;
  double linearity_tolerance = 1e-12;
  std::optional<ScalingSpec> scaling;
};

enum class VariationExpectation { second_order, boundary_term, zero, none };

struct VariationSpec {
  std::string label;
  VariationField w;
  VariationExpectation expect;
};

struct ActionSpec {
  std::optional<Cycle> cycle;
  std::optional<ExtendedPoint> start;
  double t2 = 1.0;
  int samples = 129;
  std::vector<double> epsilons;
  std::vector<VariationSpec> variations;
  double slope_min = 1.9;
  double boundary_tolerance = 0.05;
  double zero_tolerance = 1e-10;
  std::optional<ExpectedValue> expected_action;
};

enum class StudyKind { integrator, quadrature, surface_action };

struct ConvergenceSpec {
  StudyKind study = StudyKind::integrator;
  std::vector<double> ladder;  // h values (decreasing) or sample counts (increasing)
  std::optional<ExtendedPoint> start;
  double t2 = 1.0;
  std::optional<DifferentialForm> form;
  std::optional<Json> geometry;
  std::string geometry_path;
  std::optional<double> exact;
  std::optional<double> max_error;
  std::optional<std::pair<double, double>> order_range;
  std::optional<double> min_order;
};

/// A fully validated scenario.
struct Scenario {
  Json config;
  std::filesystem::path base_dir;
  std::string name;
  std::uint64_t seed = kDefaultSeed;
  std::optional<ScenarioSystem> system;
  IntegratorParams integrator;
  SamplingSpec sampling;
  std::optional<SimulateSpec> simulate;
  std::optional<SampleCheckSpec> check_dynamics;
  std::optional<SampleCheckSpec> check_liouville;
  std::optional<SymmetryCheckSpec> check_symmetry;
  std::optional<InvariantSpec> invariant;
  std::optional<MomentumSpec> momentum;
  std::optional<ActionSpec> action;
  std::optional<ConvergenceSpec> convergence;
};

namespace detail {

inline SimulateSpec read_simulate(const ConfigNode& b, const ScenarioSystem& sys) {
  b.expect_object({"start", "starts", "t0", "t1", "conservation_tolerance"});
  SimulateSpec s;
  const double t0 = b.number_or("t0", 0.0);
  if (b.has("start") == b.has("starts")) b.fail("give exactly one of 'start' or 'starts'");
  s.starts = b.has("start") ? std::vector<ExtendedPoint>{read_point(b.child("start"), sys.dim(), t0)}
                            : read_points(b.child("starts"), sys.dim(), t0);
  s.t1 = b.child("t1").number();
  if (s.t1 == t0) b.child("t1").fail("must differ from t0");
  if (b.has("conservation_tolerance")) s.conservation_tolerance = b.positive("conservation_tolerance", 1.0);
  return s;
}

inline SampleCheckSpec read_sample_check(const std::optional<ConfigNode>& b, double default_tol) {
  SampleCheckSpec s{default_tol, 100};
  if (!b) return s;
  b->expect_object({"tolerance", "samples"});
  s.tolerance = b->positive("tolerance", default_tol);
  s.samples = static_cast<int>(b->integer_or("samples", 100));
  if (s.samples < 1) b->child("samples").fail("must be at least 1");
  return s;
}

inline SymmetryCheckSpec read_symmetry_check(const ConfigNode& b, const ScenarioSystem& sys) {
  b.expect_object({"candidates", "tolerance", "samples"});
  SymmetryCheckSpec s;
  s.tolerance = b.positive("tolerance", kSymmetryTolerance);
  s.samples = static_cast<int>(b.integer_or("samples", kSymmetrySamples));
  if (s.samples < 1) b.child("samples").fail("must be at least 1");
  const auto cands = b.child("candidates");
  if (cands.size() == 0) cands.fail("at least one candidate is required");
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto c = cands.at(i);
    const std::string expect = c.string_or("expect", "pass");
    if (expect != "pass" && expect != "fail") c.child("expect").fail("expected \"pass\" or \"fail\"");
    s.candidates.emplace_back(read_candidate(c, sys, {"expect"}), expect == "pass");
  }
  return s;
}

inline InvariantSpec read_invariant(const ConfigNode& b, const ScenarioSystem& sys, const std::filesystem::path& dir) {
  if (sys.is_nambu()) {
    b.expect_object({"type", "candidate", "geometry", "times", "drift_tolerance", "stokes_tolerance", "expected",
                     "estimate_integrator_error"});
    const std::string type = b.string_or("type", "relative");
    if (type != "relative" && type != "absolute") b.child("type").fail("expected \"relative\" or \"absolute\"");
    InvariantSpec s{read_candidate(b.child("candidate"), sys)};
    s.absolute = type == "absolute";
    s.drift_tolerance = b.positive("drift_tolerance", s.absolute ? 1e-5 : 1e-6);
    const auto g = b.child("geometry");
    if (s.absolute) {
      s.geometry = read_geometry(g, sys.dim(), dir);
      if (s.geometry->p() != sys.dim() - 1) g.fail("absolute invariants need an (n-1)-chain");
      s.stokes_tolerance = b.positive("stokes_tolerance", 1e-5);
    } else {
      if (b.has("stokes_tolerance")) b.child("stokes_tolerance").fail("only used by absolute invariants");
      s.geometry = read_cycle(g, sys.dim(), dir).chain();
      if (s.geometry->p() != sys.dim() - 2) g.fail("relative invariants need an (n-2)-cycle");
    }
    const auto tn = b.child("times");
    s.times = tn.numbers();
    const double t0 = s.geometry->sample(0)[sys.dim()];
    at_path(tn, [&] { check_times(s.times, t0); });
    s.expected = read_expected(b.optional_child("expected"));
    s.estimate_integrator_error = b.boolean_or("estimate_integrator_error", true);
    return s;
  }
  b.expect_object({"candidate", "starts", "t0", "duration", "drift_tolerance", "expected"});
  InvariantSpec s{read_candidate(b.child("candidate"), sys)};
  s.starts = read_points(b.child("starts"), sys.dim(), b.number_or("t0", 0.0));
  s.duration = b.child("duration").number();
  if (s.duration == 0.0) b.child("duration").fail("must be nonzero");
  s.drift_tolerance = b.positive("drift_tolerance", 1e-9);
  s.expected = read_expected(b.optional_child("expected"));
  return s;
}

inline MomentumSpec read_momentum(const ConfigNode& b, const ScenarioSystem& sys) {
  MomentumSpec s;
  const int nc = sys.ncoords();
  if (sys.is_nambu())
    b.expect_object({"generators", "tolerance", "linearity", "scaling"});
  else
    b.expect_object({"generators", "residual_tolerance", "drift_tolerance", "starts", "t0", "duration"});
  const auto gens = b.child("generators");
  if (gens.size() == 0) gens.fail("at least one generator is required");
  for (std::size_t j = 0; j < gens.size(); ++j) {
    const auto g = gens.at(j);
    g.expect_object({"label", "xi", "p"});
    MomentumGenerator mg{g.string_or("label", "g" + std::to_string(j + 1)), read_vector_field(g.child("xi"), sys),
                         DifferentialForm::zero(nc, 0)};
    const auto p = g.child("p");
    if (sys.is_nambu())
      mg.p = read_form(p, 1, nc, sys.scheme());
    else
      mg.p = DifferentialForm::scalar(nc, at_path(p, [&] { return parse(p.string(), sys.scheme()); }));
    s.generators.push_back(std::move(mg));
  }
  if (sys.is_nambu()) {
    s.tolerance = b.positive("tolerance", kSymmetryTolerance);
    if (auto lin = b.optional_child("linearity")) {
      lin->expect_object({"coefficients", "tolerance"});
      const auto cs = lin->child("coefficients");
      for (std::size_t k = 0; k < cs.size(); ++k) {
        auto c = cs.at(k).numbers();
        if (c.size() != s.generators.size())
          cs.at(k).fail("needs one coefficient per generator (" + std::to_string(s.generators.size()) + ")");
        s.linearity.push_back(std::move(c));
      }
      s.linearity_tolerance = lin->positive("tolerance", 1e-12);
    }
    if (auto sc = b.optional_child("scaling")) {
      sc->expect_object({"xi", "p1", "p2", "lambdas", "tolerance"});
      if (sys.dim() != 3) sc->fail("the scaling demonstration is defined for n = 3");
      const auto p1 = sc->child("p1"), p2 = sc->child("p2");
      ScalingSpec spec{read_vector_field(sc->child("xi"), sys), at_path(p1, [&] { return parse(p1.string()); }),
                       at_path(p2, [&] { return parse(p2.string()); }), sc->child("lambdas").numbers(),
                       sc->positive("tolerance", 1e-12)};
      if (spec.lambdas.empty()) sc->child("lambdas").fail("at least one lambda is required");
      s.scaling = std::move(spec);
    }
  } else {
    s.tolerance = b.positive("residual_tolerance", kSymmetryTolerance);
    s.drift_tolerance = b.positive("drift_tolerance", 1e-9);
    s.starts = read_points(b.child("starts"), sys.dim(), b.number_or("t0", 0.0));
    s.duration = b.child("duration").number();
  }
  return s;
}

inline ActionSpec read_action(const ConfigNode& b, const ScenarioSystem& sys, const std::filesystem::path& dir) {
  ActionSpec s;
  if (sys.is_nambu()) {
    b.expect_object({"cycle", "t2", "time_samples", "epsilons", "variations", "slope_min", "boundary_tolerance",
                     "zero_tolerance", "expected_action"});
    const auto c = b.child("cycle");
    s.cycle = read_cycle(c, sys.dim(), dir);
    if (s.cycle->p() != sys.dim() - 2) c.fail("the action needs an (n-2)-cycle");
    s.samples = static_cast<int>(b.integer_or("time_samples", 129));
    if (s.samples < 2) b.child("time_samples").fail("must be at least 2");
    s.t2 = b.child("t2").number();
    if (!(s.t2 > s.cycle->time())) b.child("t2").fail("must exceed the cycle time");
  } else {
    b.expect_object({"start", "t0", "t2", "samples", "epsilons", "variations", "slope_min", "boundary_tolerance",
                     "zero_tolerance", "expected_action"});
    const double t0 = b.number_or("t0", 0.0);
    s.start = read_point(b.child("start"), sys.dim(), t0);
    s.samples = static_cast<int>(b.integer_or("samples", kDefaultActionSamples));
    if (s.samples < 2) b.child("samples").fail("must be at least 2");
    s.t2 = b.child("t2").number();
    if (!(s.t2 > t0)) b.child("t2").fail("must exceed t0");
  }
  s.epsilons = read_epsilons(b);
  s.slope_min = b.number_or("slope_min", 1.9);
  s.boundary_tolerance = b.positive("boundary_tolerance", 0.05);
  s.zero_tolerance = b.positive("zero_tolerance", 1e-10);
  s.expected_action = read_expected(b.optional_child("expected_action"));
  const auto vars = b.child("variations");
  if (vars.size() == 0) vars.fail("at least one variation is required");
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const auto v = vars.at(k);
    v.expect_object({"label", "w", "clamped", "expect"});
    const auto w = v.child("w");
    const auto comps = w.strings();
    if (static_cast<int>(comps.size()) != sys.dim()) w.fail("needs " + std::to_string(sys.dim()) + " spatial components");
    std::vector<bool> clamped;
    if (auto cl = v.optional_child("clamped")) {
      for (std::size_t i = 0; i < cl->size(); ++i) clamped.push_back(cl->at(i).boolean());
      if (static_cast<int>(clamped.size()) != sys.dim()) cl->fail("needs one entry per spatial coordinate");
    }
    const std::string expect = v.string_or("expect", "none");
    VariationExpectation e = VariationExpectation::none;
    if (expect == "second_order")
      e = VariationExpectation::second_order;
    else if (expect == "boundary_term")
      e = VariationExpectation::boundary_term;
    else if (expect == "zero")
      e = VariationExpectation::zero;
    else if (expect != "none")
      v.child("expect").fail("expected \"second_order\", \"boundary_term\", \"zero\" or \"none\"");
    if (e == VariationExpectation::boundary_term && sys.is_nambu() && sys.dim() != 3)
      v.child("expect").fail("the boundary term is available for n = 3 only");
    s.variations.push_back({v.string_or("label", "w" + std::to_string(k + 1)),
                            at_path(w, [&] { return VariationField::from_exprs(comps, clamped, sys.scheme()); }), e});
  }
  return s;
}

inline ConvergenceSpec read_convergence(const ConfigNode& b, const ScenarioSystem& sys,
                                        const std::filesystem::path& dir) {
  ConvergenceSpec s;
  const std::string study = b.child("study").string();
  if (study == "integrator") {
    b.expect_object({"study", "start", "t0", "t2", "h", "order_range", "max_error", "exact"});
    s.study = StudyKind::integrator;
    const double t0 = b.number_or("t0", 0.0);
    s.start = read_point(b.child("start"), sys.dim(), t0);
    s.t2 = b.child("t2").number();
    if (!(s.t2 > t0)) b.child("t2").fail("must exceed t0");
    s.ladder = b.child("h").numbers();
    check_ladder(b.child("h"), s.ladder, false);
    for (std::size_t k = 0; k < s.ladder.size(); ++k)
      if (!(s.ladder[k] > 0)) b.child("h").at(k).fail("must be positive");
    if (b.has("exact")) b.child("exact").fail("integrator studies measure error against the finest step");
  } else if (study == "quadrature" || study == "surface_action") {
    const bool quad = study == "quadrature";
    if (quad)
      b.expect_object({"study", "form", "geometry", "counts", "exact", "max_error", "order_range", "min_order"});
    else
      b.expect_object({"study", "cycle", "t2", "time_samples", "exact", "max_error", "order_range", "min_order"});
    s.study = quad ? StudyKind::quadrature : StudyKind::surface_action;
    const auto ladder = b.child(quad ? "counts" : "time_samples");
    for (std::size_t k = 0; k < ladder.size(); ++k) s.ladder.push_back(static_cast<double>(ladder.at(k).integer()));
    check_ladder(ladder, s.ladder, true);
    const auto g = b.child(quad ? "geometry" : "cycle");
    s.geometry = g.raw();
    s.geometry_path = g.path();
    if (quad) {
      const Chain first = read_geometry(g, sys.dim(), dir, static_cast<int>(s.ladder.front()));
      s.form = read_form(b.child("form"), first.p(), sys.ncoords(), sys.scheme());
    } else {
      if (!sys.is_nambu()) b.child("study").fail("surface_action studies need a nambu system");
      const Cycle c = read_cycle(g, sys.dim(), dir);
      if (c.p() != sys.dim() - 2) g.fail("the action needs an (n-2)-cycle");
      s.t2 = b.child("t2").number();
      if (!(s.t2 > c.time())) b.child("t2").fail("must exceed the cycle time");
      if (s.ladder.front() < 2) ladder.at(0).fail("must be at least 2");
    }
  } else {
    b.child("study").fail("expected \"integrator\", \"quadrature\" or \"surface_action\"");
  }
  if (b.has("exact")) s.exact = b.child("exact").constant();
  if (b.has("max_error")) s.max_error = b.positive("max_error", 1.0);
  if (auto r = b.optional_child("order_range")) {
    const auto v = r->numbers();
    if (v.size() != 2 || !(v[0] <= v[1])) r->fail("expected [lo, hi] with lo <= hi");
    s.order_range = {v[0], v[1]};
  }
  if (b.has("min_order")) s.min_order = b.child("min_order").number();
  return s;
}

}  // namespace detail

/// Validates the whole configuration, including blocks for commands other
/// than the one about to run.
inline Scenario load_scenario(const Json& config, std::filesystem::path base_dir) {
  Scenario sc;
  sc.config = config;
  sc.base_dir = std::move(base_dir);
  const ConfigNode root(sc.config, "$");
  root.expect_object({"name", "description", "seed", "system", "integrator", "sampling", "simulate",
                      "check-dynamics", "check-liouville", "check-symmetry", "invariant", "momentum", "action",
                      "convergence"});
  sc.name = root.string_or("name", "scenario");
  if (root.has("description")) root.child("description").string();
  if (auto s = root.optional_child("seed")) {
    if (!s->raw().is_number_unsigned()) s->fail("expected a non-negative integer");
    sc.seed = s->raw().get<std::uint64_t>();
  }
  sc.system.emplace(read_system(root.child("system")));
  const ScenarioSystem& sys = *sc.system;
  sc.integrator = read_integrator(root.optional_child("integrator"));
  sc.sampling = read_sampling(root.optional_child("sampling"), sys.dim());
  if (auto b = root.optional_child("simulate")) sc.simulate = detail::read_simulate(*b, sys);
  sc.check_dynamics = detail::read_sample_check(root.optional_child("check-dynamics"), 1e-9);
  sc.check_liouville = detail::read_sample_check(root.optional_child("check-liouville"), 1e-6);
  if (auto b = root.optional_child("check-symmetry")) sc.check_symmetry = detail::read_symmetry_check(*b, sys);
  if (auto b = root.optional_child("invariant")) sc.invariant = detail::read_invariant(*b, sys, sc.base_dir);
  if (auto b = root.optional_child("momentum")) sc.momentum = detail::read_momentum(*b, sys);
  if (auto b = root.optional_child("action")) sc.action = detail::read_action(*b, sys, sc.base_dir);
  if (auto b = root.optional_child("convergence")) sc.convergence = detail::read_convergence(*b, sys, sc.base_dir);
  return sc;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
};

/// Checks, results, warnings and CSV series collected while a command runs.
class Outcome {
 public:
  Json results = Json::object();
  std::vector<std::string> warnings;
  std::map<std::string, std::string> csv;

  void check_le(const std::string& name, double value, double bound) { add(name, value, "<=", bound, value <= bound); }
  void check_ge(const std::string& name, double value, double bound) { add(name, value, ">=", bound, value >= bound); }
  void check_gt(const std::string& name, double value, double bound) { add(name, value, ">", bound, value > bound); }
  void check_in(const std::string& name, double value, double lo, double hi) {
    Json c = Json::object();
    c["name"] = name;
    c["value"] = value;
    c["op"] = "in";
    c["bound"] = Json::array({lo, hi});
    c["pass"] = value >= lo && value <= hi;
    all_pass_ = all_pass_ && c["pass"].get<bool>();
    checks_.push_back(std::move(c));
  }

  bool all_pass() const { return all_pass_; }
  const Json& checks() const { return checks_; }

 private:
  void add(const std::string& name, double value, const char* op, double bound, bool pass) {
    Json c = Json::object();
    c["name"] = name;
    c["value"] = value;
    c["op"] = op;
    c["bound"] = bound;
    c["pass"] = pass;
    all_pass_ = all_pass_ && pass;
    checks_.push_back(std::move(c));
  }

  Json checks_ = Json::array();
  bool all_pass_ = true;
};

namespace detail {

inline std::string csv_row(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += format_number(v);
  }
  return out + '\n';
}

inline std::string coords_header(int n) {
  std::string h;
  for (int i = 0; i < n; ++i) h += ",x" + std::to_string(i + 1);
  return h;
}

inline std::string coords_cells(std::span<const double> x) {
  std::string out;
  for (double v : x) out += ',' + format_number(v);
  return out;
}

inline Json to_json(std::span<const double> x) { return Json(std::vector<double>(x.begin(), x.end())); }

inline double relative_or_absolute(double drift, double base) {
  return std::abs(base) > 1e-300 ? drift / std::abs(base) : drift;
}

inline std::vector<ExtendedPoint> sample(const Scenario& sc, int fallback_count, std::uint64_t seed) {
  return sample_points(sc.sampling.region, sc.sampling.count.value_or(fallback_count), seed);
}

inline void run_simulate(const Scenario& sc, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.simulate;
  const auto& sys = *sc.system;
  const double tol = opt.tolerance.value_or(spec.conservation_tolerance.value_or(0.0));
  const bool assert_conservation = opt.tolerance || spec.conservation_tolerance;
  const auto conserved = sys.conserved_candidates();
  std::string csv = "sample,t" + coords_header(sys.dim()) + "\n";
  Json trajs = Json::array();
  std::vector<double> worst(conserved.size(), 0.0);
  for (std::size_t s = 0; s < spec.starts.size(); ++s) {
    const auto traj = integrate(sys.dynamics(), spec.starts[s], spec.t1, sc.integrator);
    std::ostringstream os;
    traj.write_csv(os, static_cast<long>(s), false);
    csv += os.str();
    Json t = Json::object();
    t["start"] = to_json(spec.starts[s].x());
    t["t_final"] = traj.back().t();
    t["final"] = to_json(traj.back().x());
    t["samples"] = traj.size();
    Json drifts = Json::array();
    for (std::size_t k = 0; k < conserved.size(); ++k) {
      const auto& h = conserved[k];
      if (h.uses_time()) {
        drifts.push_back(nullptr);
        continue;
      }
      const double h0 = eval(h, spec.starts[s].x());
      const double d = drift_along([&](const ExtendedPoint& p) { return eval(h, p.x()); }, traj);
      drifts.push_back(relative_or_absolute(d, h0));
      worst[k] = std::max(worst[k], relative_or_absolute(d, h0));
    }
    t["relative_drift"] = std::move(drifts);
    trajs.push_back(std::move(t));
  }
  out.results["trajectories"] = std::move(trajs);
  out.csv["trajectory.csv"] = std::move(csv);
  for (std::size_t k = 0; k < conserved.size(); ++k) {
    const std::string name = sys.is_nambu() ? "H" + std::to_string(k + 1) : "H";
    if (conserved[k].uses_time()) {
      out.warnings.push_back(name + " depends on t; its drift is not reported");
      continue;
    }
    if (assert_conservation) out.check_le("relative drift of " + name, worst[k], tol);
  }
}

inline void run_check_dynamics(const Scenario& sc, std::uint64_t seed, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.check_dynamics;
  const auto& sys = *sc.system;
  const auto pts = sample_points(sc.sampling.region, sc.sampling.count.value_or(spec.samples), seed);
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    res[i] = sys.is_nambu() ? verify_dynamics(sys.nambu(), pts[i]).max_residual
                            : hamilton_velocity(sys.hamiltonian(), pts[i]).residual;
  });
  std::string csv = "sample,t" + coords_header(sys.dim()) + ",residual\n";
  double worst = 0.0;
  std::size_t worst_i = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    csv += std::to_string(i) + ',' + format_number(pts[i].t()) + coords_cells(pts[i].x()) + ',' +
           format_number(res[i]) + '\n';
    if (res[i] > worst || i == 0) {
      worst = res[i];
      worst_i = i;
    }
  }
  out.results["samples"] = pts.size();
  out.results["max_residual"] = worst;
  out.results["worst_point"] = to_json(pts[worst_i].coords());
  out.csv["residuals.csv"] = std::move(csv);
  out.check_le("max |i_v d sigma|", worst, opt.tolerance.value_or(spec.tolerance));
}

inline void run_check_liouville(const Scenario& sc, std::uint64_t seed, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.check_liouville;
  const auto& sys = *sc.system;
  const auto pts = sample_points(sc.sampling.region, sc.sampling.count.value_or(spec.samples), seed);
  std::vector<double> div(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    if (sys.is_nambu()) {
      div[i] = liouville_divergence(sys.nambu(), pts[i]);
    } else {
      div[i] = spatial_divergence(
          [&](const ExtendedPoint& q) {
            const auto v = hamilton_velocity(sys.hamiltonian(), q).velocity;
            return std::vector<double>(v.spatial().begin(), v.spatial().end());
          },
          pts[i]);
    }
  });
  std::string csv = "sample,t" + coords_header(sys.dim()) + ",divergence\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    csv += std::to_string(i) + ',' + format_number(pts[i].t()) + coords_cells(pts[i].x()) + ',' +
           format_number(div[i]) + '\n';
    worst = std::max(worst, std::abs(div[i]));
  }
  out.results["samples"] = pts.size();
  out.results["max_abs_divergence"] = worst;
  out.csv["divergence.csv"] = std::move(csv);
  out.check_le("max |div v|", worst, opt.tolerance.value_or(spec.tolerance));
}

inline Json symmetry_json(const SymmetryReport& r) {
  Json j = Json::object();
  j["pass"] = r.pass;
  j["max_residual"] = r.max_residual;
  j["tolerance"] = r.tolerance;
  j["worst_basis"] = r.worst_basis;
  j["worst_sample"] = r.worst_sample;
  j["samples"] = r.samples;
  return j;
}

inline void run_check_symmetry(const Scenario& sc, std::uint64_t seed, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.check_symmetry;
  const auto& sys = *sc.system;
  const double tol = opt.tolerance.value_or(spec.tolerance);
  const auto pts = sample(sc, spec.samples, seed);
  Json list = Json::array();
  for (const auto& [cand, expect_pass] : spec.candidates) {
    const auto r = sys.is_nambu() ? check_symmetry(sys.nambu(), cand, pts, tol)
                                  : check_hamiltonian_symmetry(sys.hamiltonian(), cand, pts, tol);
    Json j = symmetry_json(r);
    j["label"] = cand.label;
    j["expected"] = expect_pass ? "pass" : "fail";
    list.push_back(std::move(j));
    if (expect_pass)
      out.check_le("residual of " + cand.label, r.max_residual, tol);
    else
      out.check_gt("residual of " + cand.label + " (expected to fail)", r.max_residual, tol);
  }
  out.results["candidates"] = std::move(list);
}

inline void run_invariant(const Scenario& sc, std::uint64_t seed, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.invariant;
  const auto& sys = *sc.system;
  const double drift_tol = opt.tolerance.value_or(spec.drift_tolerance);
  if (!sys.is_nambu()) {
    const auto pts = sample(sc, kSymmetrySamples, seed);
    const auto f = conserved_function(sys.hamiltonian(), spec.candidate, pts);
    for (const auto& w : f.warnings()) out.warnings.push_back(w);
    std::string csv = "sample,t,value\n";
    Json list = Json::array();
    double worst = 0.0;
    for (std::size_t s = 0; s < spec.starts.size(); ++s) {
      const auto traj = integrate(sys.hamiltonian(), spec.starts[s], spec.starts[s].t() + spec.duration, sc.integrator);
      for (std::size_t k = 0; k < traj.size(); ++k)
        csv += std::to_string(s) + ',' + format_number(traj.time(k)) + ',' + format_number(f(traj.point(k))) + '\n';
      const double d = drift_along(f, traj);
      worst = std::max(worst, d);
      Json j = Json::object();
      j["start"] = to_json(spec.starts[s].x());
      j["value"] = f(spec.starts[s]);
      j["drift"] = d;
      list.push_back(std::move(j));
    }
    out.results["kind"] = "conserved_function";
    out.results["generator"] = spec.candidate.label;
    out.results["symmetry"] = symmetry_json(f.check());
    out.results["trajectories"] = std::move(list);
    out.csv["invariant.csv"] = std::move(csv);
    out.check_le("drift of f", worst, drift_tol);
    if (spec.expected)
      out.check_le("|f(start) - expected|", std::abs(f(spec.starts[0]) - spec.expected->value),
                   spec.expected->tolerance);
    return;
  }
  InvariantOptions io;
  io.integrator = sc.integrator;
  io.estimate_integrator_error = spec.estimate_integrator_error;
  io.symmetry_points = sample(sc, kSymmetrySamples, seed);
  const InvariantReport r = spec.absolute
                                ? absolute_invariant(sys.nambu(), spec.candidate, *spec.geometry, spec.times, io)
                                : relative_invariant(sys.nambu(), spec.candidate, Cycle(*spec.geometry), spec.times, io);
  for (const auto& w : r.warnings) out.warnings.push_back(w);
  std::string csv = "t,value,estimate\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) csv += csv_row({r.times[k], r.values[k], r.estimates[k]});
  out.csv["invariant.csv"] = std::move(csv);
  out.results["kind"] = spec.absolute ? "absolute" : "relative";
  out.results["generator"] = r.generator;
  out.results["times"] = r.times;
  out.results["values"] = r.values;
  out.results["estimates"] = r.estimates;
  out.results["drift"] = r.drift;
  out.results["relative_drift"] = r.relative_drift;
  out.results["max_stretch"] = r.max_stretch;
  if (r.symmetry) out.results["symmetry"] = symmetry_json(*r.symmetry);
  out.check_le("drift", r.drift, drift_tol);
  if (spec.expected)
    out.check_le("|value(t0) - expected|", std::abs(r.values.front() - spec.expected->value),
                 spec.expected->tolerance);
  if (spec.absolute) {
    const auto st = stokes_consistency(sys.nambu(), spec.candidate, *spec.geometry);
    Json j = Json::object();
    j["chain_integral"] = st.chain_integral;
    j["boundary_integral"] = st.boundary_integral;
    j["residual"] = st.residual;
    j["estimate"] = st.estimate;
    out.results["stokes"] = std::move(j);
    out.check_le("Stokes residual", st.residual, *spec.stokes_tolerance);
  }
}

inline void run_momentum(const Scenario& sc, std::uint64_t seed, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.momentum;
  const auto& sys = *sc.system;
  const double tol = opt.tolerance.value_or(spec.tolerance);
  const auto pts = sample(sc, kSymmetrySamples, seed);
  if (!sys.is_nambu()) {
    std::vector<Generator> gens;
    std::vector<DifferentialForm> ps;
    for (const auto& g : spec.generators) {
      gens.push_back({g.label, g.xi});
      ps.push_back(g.p);
    }
    const auto reports = verify_extended_momentum_map(sys.hamiltonian(), gens, ps, pts, spec.starts, spec.duration,
                                                      sc.integrator, tol, spec.drift_tolerance);
    Json list = Json::array();
    for (const auto& r : reports) {
      Json j = Json::object();
      j["label"] = r.label;
      j["residual"] = r.residual;
      j["drift"] = r.pdot_drift;
      list.push_back(std::move(j));
      out.check_le("residual of P_" + r.label, r.residual, tol);
      out.check_le("drift of P_" + r.label, r.pdot_drift, spec.drift_tolerance);
    }
    out.results["generators"] = std::move(list);
    return;
  }
  MomentumSystem ms;
  for (const auto& g : spec.generators) {
    ms.generators.push_back({g.label, g.xi});
    ms.candidates.push_back(g.p);
  }
  Json list = Json::array();
  for (const auto& r : verify_momentum_one_forms(sys.nambu(), ms, pts, tol)) {
    Json j = Json::object();
    j["label"] = r.label;
    j["closedness"] = r.closedness;
    j["exactness"] = r.exactness;
    j["pass"] = r.pass;
    list.push_back(std::move(j));
    out.check_le("closedness of i_xi d sigma for " + r.label, r.closedness, tol);
    out.check_le("exactness residual of P_" + r.label, r.exactness, tol);
  }
  out.results["generators"] = std::move(list);
  if (!spec.linearity.empty()) {
    Json lin = Json::array();
    for (const auto& coeffs : spec.linearity) {
      const auto r = momentum_linearity(sys.nambu(), ms, coeffs, pts);
      Json j = Json::object();
      j["coefficients"] = coeffs;
      j["combined_residual"] = r.combined_residual;
      j["weighted_bound"] = r.weighted_bound;
      j["excess"] = r.excess;
      lin.push_back(std::move(j));
      out.check_le("linear combination excess", r.excess, spec.linearity_tolerance);
    }
    out.results["linearity"] = std::move(lin);
  }
  if (spec.scaling) {
    const auto& s = *spec.scaling;
    Json list2 = Json::array();
    std::string csv = "lambda,lhs_scale,rhs_scale,ratio,degenerate\n";
    for (double lambda : s.lambdas) {
      const auto r = scaling_mismatch(sys.nambu(), s.xi, s.p1, s.p2, lambda, pts, seed);
      Json j = Json::object();
      j["lambda"] = r.lambda;
      j["lhs_scale"] = r.lhs_scale;
      j["rhs_scale"] = r.rhs_scale;
      j["ratio"] = r.ratio;
      j["degenerate"] = r.degenerate;
      list2.push_back(std::move(j));
      csv += csv_row({r.lambda, r.lhs_scale, r.rhs_scale, r.ratio, r.degenerate ? 1.0 : 0.0});
      out.check_le("|ratio - lambda| at lambda = " + format_number(lambda), std::abs(r.ratio - lambda), s.tolerance);
    }
    out.results["scaling"] = std::move(list2);
    out.csv["scaling.csv"] = std::move(csv);
  }
}

inline Json action_json(const ActionReport& r) {
  Json j = Json::object();
  j["epsilons"] = r.epsilons;
  j["deltas"] = r.deltas;
  j["slope"] = r.slope;
  j["all_zero"] = r.all_zero;
  j["first_variation"] = r.first_variation;
  j["boundary_prediction"] = r.boundary_prediction ? Json(*r.boundary_prediction) : Json(nullptr);
  j["relative_mismatch"] = r.relative_mismatch();
  j["clamp_violation"] = r.clamp_violation;
  return j;
}

inline void run_action(const Scenario& sc, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.action;
  const auto& sys = *sc.system;
  const double boundary_tol = opt.tolerance.value_or(spec.boundary_tolerance);
  std::optional<SolutionSurface> surface;
  std::optional<Trajectory> traj;
  if (sys.is_nambu()) {
    TransportReport tr;
    surface = build_solution_surface(sys.nambu(), *spec.cycle, spec.t2, spec.samples, sc.integrator, &tr);
    if (tr.refinement_warning)
      out.warnings.push_back("final cycle stretched by " + format_number(tr.max_stretch) + "; refine the cycle");
  } else {
    traj = integrate(sys.hamiltonian(), *spec.start, spec.t2, sc.integrator);
  }
  Json list = Json::array();
  std::optional<double> action;
  for (const auto& v : spec.variations) {
    const ActionReport r = sys.is_nambu()
                               ? vary_action(sys.nambu(), *surface, v.w, spec.epsilons)
                               : hamiltonian_action_check(sys.hamiltonian(), *traj, v.w, spec.epsilons, spec.samples);
    if (!action) {
      action = r.action;
      out.results["action"] = r.action;
      out.results["action_estimate"] = r.action_estimate;
    }
    Json j = action_json(r);
    j["label"] = v.label;
    list.push_back(std::move(j));
    std::ostringstream os;
    r.write_csv(os);
    out.csv["variation_" + v.label + ".csv"] = os.str();
    switch (v.expect) {
      case VariationExpectation::second_order:
        if (r.clamp_violation > 0.0)
          out.warnings.push_back(v.label + ": clamped components are nonzero on the boundary (max " +
                                 format_number(r.clamp_violation) + ")");
        out.check_ge("log-log slope of dS for " + v.label, r.slope, spec.slope_min);
        break;
      case VariationExpectation::boundary_term:
        out.check_le("|dS/eps - boundary term| / |boundary term| for " + v.label, r.relative_mismatch(),
                     boundary_tol);
        break;
      case VariationExpectation::zero:
      {
        double worst = 0.0;
        for (double d : r.deltas) worst = std::max(worst, std::abs(d));
        out.check_le("max |dS| for " + v.label, worst, spec.zero_tolerance);
        break;
      }
      case VariationExpectation::none:
        break;
    }
  }
  out.results["variations"] = std::move(list);
  if (spec.expected_action && action)
    out.check_le("|S - expected|", std::abs(*action - spec.expected_action->value), spec.expected_action->tolerance);
}

/// Least-squares slope of log(error) against log(step) over the positive errors.
inline double fitted_order(const std::vector<double>& steps, const std::vector<double>& errors) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (!(errors[k] > 0.0)) continue;
    const double x = std::log(steps[k]), y = std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void run_convergence(const Scenario& sc, const RunOptions& opt, Outcome& out) {
  const auto& spec = *sc.convergence;
  const auto& sys = *sc.system;
  std::vector<double> values, steps;
  std::vector<std::vector<double>> states;
  const ConfigNode gnode = spec.geometry ? ConfigNode(*spec.geometry, spec.geometry_path) : ConfigNode(sc.config, "$");
  for (double level : spec.ladder) {
    switch (spec.study) {
      case StudyKind::integrator: {
        IntegratorParams p = sc.integrator;
        p.method = Method::rk4_fixed;
        p.h = level;
        const auto traj = integrate(sys.dynamics(), *spec.start, spec.t2, p);
        const ExtendedPoint end = traj.back();
        states.emplace_back(end.x().begin(), end.x().end());
        values.push_back(states.back()[0]);
        steps.push_back(level);
        break;
      }
      case StudyKind::quadrature: {
        const Chain c = read_geometry(gnode, sys.dim(), sc.base_dir, static_cast<int>(level));
        values.push_back(integrate_over_chain(*spec.form, c).value);
        steps.push_back(1.0 / level);
        break;
      }
      case StudyKind::surface_action: {
        const Cycle c = read_cycle(gnode, sys.dim(), sc.base_dir);
        const auto surface = build_solution_surface(sys.nambu(), c, spec.t2, static_cast<int>(level), sc.integrator);
        values.push_back(takhtajan_action(sys.nambu(), surface).value);
        steps.push_back(1.0 / (level - 1.0));
        break;
      }
    }
  }
  const std::size_t m = values.size();
  std::vector<double> errors(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (spec.exact) {
      errors[k] = std::abs(values[k] - *spec.exact);
    } else if (spec.study == StudyKind::integrator) {
      double e = 0.0;
      for (std::size_t i = 0; i < states[k].size(); ++i) e = std::max(e, std::abs(states[k][i] - states[m - 1][i]));
      errors[k] = e;
    } else {
      errors[k] = std::abs(values[k] - values[m - 1]);
    }
  }
  // Without an exact value the finest level is the reference and carries no error.
  const std::size_t fit_count = spec.exact ? m : m - 1;
  const double order = fitted_order(std::vector<double>(steps.begin(), steps.begin() + fit_count),
                                    std::vector<double>(errors.begin(), errors.begin() + fit_count));
  std::string csv = "resolution,value,error,order\n";
  Json table = Json::array();
  for (std::size_t k = 0; k < m; ++k) {
    double local = std::numeric_limits<double>::quiet_NaN();
    if (k > 0 && k < fit_count && errors[k] > 0.0 && errors[k - 1] > 0.0)
      local = std::log(errors[k - 1] / errors[k]) / std::log(steps[k - 1] / steps[k]);
    const bool has_error = k < fit_count;
    csv += format_number(spec.ladder[k]) + ',' + format_number(values[k]) + ',' +
           (has_error ? format_number(errors[k]) : std::string("")) + ',' +
           (std::isnan(local) ? std::string("") : format_number(local)) + '\n';
    Json row = Json::object();
    row["resolution"] = spec.ladder[k];
    row["value"] = values[k];
    row["error"] = has_error ? Json(errors[k]) : Json(nullptr);
    row["order"] = std::isnan(local) ? Json(nullptr) : Json(local);
    table.push_back(std::move(row));
  }
  out.csv["convergence.csv"] = std::move(csv);
  const char* names[] = {"integrator", "quadrature", "surface_action"};
  out.results["study"] = names[static_cast<int>(spec.study)];
  out.results["reference"] = spec.exact ? "exact" : "finest";
  out.results["table"] = std::move(table);
  out.results["fitted_order"] = order;
  if (spec.order_range) out.check_in("fitted order", order, spec.order_range->first, spec.order_range->second);
  if (spec.min_order) out.check_ge("fitted order", order, *spec.min_order);
  const auto max_error = opt.tolerance ? opt.tolerance : spec.max_error;
  if (max_error) {
    if (spec.exact)
      out.check_le("error at finest resolution", errors[m - 1], *max_error);
    else
      out.check_le("error at second-finest resolution", errors[m - 2], *max_error);
  }
}

}  // namespace detail

struct RunResult {
  ExitCode exit_code = ExitCode::pass;
  /// Deterministic part of the report.
  Json body = Json::object();
  std::map<std::string, std::string> csv;
  std::string diagnostic;
};

namespace detail {

inline Json base_body(const std::string& command, const Json* config, const RunOptions& opt) {
  Json body = Json::object();
  body["command"] = command;
  if (config) {
    body["config_sha256"] = sha256_hex(config->dump());
    body["config"] = *config;
  }
  Json overrides = Json::object();
  if (opt.seed) overrides["seed"] = *opt.seed;
  if (opt.tolerance) overrides["tol"] = *opt.tolerance;
  body["overrides"] = std::move(overrides);
  return body;
}

inline RunResult failure(Json body, ExitCode code, const std::string& status, const std::string& message,
                         const std::string& path = "") {
  RunResult r;
  r.exit_code = code;
  body["status"] = status;
  Json err = Json::object();
  err["message"] = message;
  if (!path.empty()) err["path"] = path;
  body["error"] = std::move(err);
  body["exit_code"] = static_cast<int>(code);
  r.body = std::move(body);
  r.diagnostic = message;
  return r;
}

}  // namespace detail

/// Executes `command` on an already-parsed configuration.
inline RunResult run_scenario(const std::string& command, const Json& config, const std::filesystem::path& base_dir,
                              const RunOptions& opt = {}) {
  Json body = detail::base_body(command, &config, opt);
  bool known = false;
  for (const auto& c : scenario_commands()) known = known || c == command;
  if (!known) return detail::failure(std::move(body), ExitCode::schema_violation, "schema_violation",
                                     "unknown command '" + command + "'");
  Scenario sc;
  try {
    sc = load_scenario(config, base_dir);
  } catch (const ConfigError& e) {
    return detail::failure(std::move(body), ExitCode::schema_violation, "schema_violation", e.what(), e.path());
  }
  const std::uint64_t seed = opt.seed.value_or(sc.seed);
  body["scenario"] = sc.name;
  body["seed"] = seed;
  Json sys = Json::object();
  sys["kind"] = sc.system->kind();
  sys["label"] = sc.system->label();
  sys["dimension"] = sc.system->dim();
  body["system"] = std::move(sys);

  const auto missing = [&](const char* block) {
    return detail::failure(std::move(body), ExitCode::schema_violation, "schema_violation",
                           std::string("$.") + block + ": missing required field (needed by '" + command + "')",
                           std::string("$.") + block);
  };
  Outcome out;
  try {
    if (command == "simulate") {
      if (!sc.simulate) return missing("simulate");
      detail::run_simulate(sc, opt, out);
    } else if (command == "check-dynamics") {
      detail::run_check_dynamics(sc, seed, opt, out);
    } else if (command == "check-liouville") {
      detail::run_check_liouville(sc, seed, opt, out);
    } else if (command == "check-symmetry") {
      if (!sc.check_symmetry) return missing("check-symmetry");
      detail::run_check_symmetry(sc, seed, opt, out);
    } else if (command == "invariant") {
      if (!sc.invariant) return missing("invariant");
      detail::run_invariant(sc, seed, opt, out);
    } else if (command == "momentum") {
      if (!sc.momentum) return missing("momentum");
      detail::run_momentum(sc, seed, opt, out);
    } else if (command == "action") {
      if (!sc.action) return missing("action");
      detail::run_action(sc, opt, out);
    } else {
      if (!sc.convergence) return missing("convergence");
      detail::run_convergence(sc, opt, out);
    }
  } catch (const ConfigError& e) {
    return detail::failure(std::move(body), ExitCode::schema_violation, "schema_violation", e.what(), e.path());
  } catch (const FlowError& e) {
    body["results"] = out.results;
    return detail::failure(std::move(body), ExitCode::numerical_failure, "numerical_failure", e.what());
  } catch (const std::exception& e) {
    body["results"] = out.results;
    return detail::failure(std::move(body), ExitCode::numerical_failure, "numerical_failure", e.what());
  }
  RunResult r;
  r.exit_code = out.all_pass() ? ExitCode::pass : ExitCode::tolerance_failure;
  body["results"] = std::move(out.results);
  body["checks"] = out.checks();
  body["warnings"] = out.warnings;
  body["status"] = out.all_pass() ? "pass" : "tolerance_failure";
  body["exit_code"] = static_cast<int>(r.exit_code);
  r.body = std::move(body);
  r.csv = std::move(out.csv);
  if (!out.all_pass()) r.diagnostic = "one or more checks exceeded their tolerance";
  return r;
}

/// Reads and parses the configuration file, then runs.
inline RunResult run_scenario_file(const std::string& command, const std::filesystem::path& config_path,
                                   const RunOptions& opt = {}) {
  std::ifstream in(config_path);
  if (!in) {
    return detail::failure(detail::base_body(command, nullptr, opt), ExitCode::schema_violation, "schema_violation",
                           "cannot open config '" + config_path.string() + "'", "$");
  }
  Json config;
  try {
    config = Json::parse(in);
  } catch (const Json::parse_error& e) {
    return detail::failure(detail::base_body(command, nullptr, opt), ExitCode::schema_violation, "schema_violation",
                           std::string("invalid JSON: ") + e.what(), "$");
  }
  return run_scenario(command, config, config_path.parent_path(), opt);
}

/// report.json holds {"body": ..., "meta": ...}; only meta varies between
/// identical runs.
inline std::string render_report(const RunResult& r, double wall_seconds) {
  Json report = Json::object();
  report["body"] = r.body;
  Json meta = Json::object();
  meta["tool_version"] = kToolVersion;
  meta["wall_time_seconds"] = wall_seconds;
  meta["threads"] = worker_count();
  report["meta"] = std::move(meta);
  return report.dump(2) + "\n";
}

inline void write_outputs(const std::filesystem::path& out_dir, const RunResult& r, double wall_seconds) {
  std::filesystem::create_directories(out_dir);
  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + (out_dir / name).string() + "'");
    f << content;
  };
  write("report.json", render_report(r, wall_seconds));
  for (const auto& [name, content] : r.csv) write(name, content);
}

}  // namespace nambu
