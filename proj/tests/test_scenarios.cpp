#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nambu/scenario.hpp"

using namespace nambu;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarioDir = NAMBU_SCENARIO_DIR;

Json load(const std::string& name) {
  std::ifstream in(kScenarioDir / (name + ".json"));
  return Json::parse(in);
}

RunResult run(const std::string& command, const Json& config, const RunOptions& opt = {}) {
  return run_scenario(command, config, kScenarioDir, opt);
}

Json rotor_config() {
  return Json::parse(R"json({
    "name": "unit",
    "system": {"kind": "nambu", "builtin": "rotor"},
    "check-symmetry": {"candidates": [{"label": "rotation", "xi": ["-x2", "x1", "0"],
                                       "chi": [{"coefficient": "(x1^2 - x2^2)/2", "indices": [2]}]}]}
  })json");
}

std::string error_path(const RunResult& r) { return r.body["error"].value("path", ""); }

}  // namespace

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, EchoesConfigAndHash) {
  const Json cfg = rotor_config();
  const auto r = run("check-symmetry", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::pass);
  EXPECT_EQ(r.body["config"], cfg);
  EXPECT_EQ(r.body["config_sha256"], sha256_hex(cfg.dump()));
  EXPECT_EQ(r.body["seed"], kDefaultSeed);
  EXPECT_EQ(r.body["system"]["dimension"], 3);
  EXPECT_EQ(r.body["status"], "pass");
}

TEST(Report, BodyIsDeterministicAndMetaIsSeparate) {
  const Json cfg = load("rotor-rotation-invariant");
  const auto a = run("invariant", cfg), b = run("invariant", cfg);
  EXPECT_EQ(a.body.dump(), b.body.dump());
  EXPECT_EQ(a.csv, b.csv);
  const auto ra = Json::parse(render_report(a, 1.0)), rb = Json::parse(render_report(b, 2.5));
  EXPECT_EQ(ra["body"].dump(), rb["body"].dump());
  EXPECT_NE(ra["meta"], rb["meta"]);
  EXPECT_EQ(ra["meta"]["tool_version"], kToolVersion);
}

TEST(Report, SeedOverrideIsRecordedAndChangesSamples) {
  const Json cfg = load("euler-top-conservation");
  const auto a = run("check-dynamics", cfg);
  const auto b = run("check-dynamics", cfg, {std::uint64_t{7}, std::nullopt});
  EXPECT_EQ(b.body["seed"], 7);
  EXPECT_EQ(b.body["overrides"]["seed"], 7);
  EXPECT_NE(a.csv.at("residuals.csv"), b.csv.at("residuals.csv"));
  EXPECT_EQ(b.exit_code, ExitCode::pass);
}

TEST(SchemaViolation, MissingHamiltoniansReportsFieldPath) {
  const auto r = run("check-dynamics", Json::parse(R"json({"system": {"kind": "nambu"}})json"));
  EXPECT_EQ(r.exit_code, ExitCode::schema_violation);
  EXPECT_EQ(error_path(r), "$.system.hamiltonians");
  EXPECT_NE(r.body["error"]["message"].get<std::string>().find("missing required field"), std::string::npos);
}

TEST(SchemaViolation, UnknownKeysAreRejectedEverywhere) {
  Json cfg = rotor_config();
  cfg["extra"] = 1;
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.extra");
  cfg = rotor_config();
  cfg["check-symmetry"]["candidates"][0]["sigma"] = "x1";
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.check-symmetry.candidates[0].sigma");
  cfg = rotor_config();
  cfg["integrator"] = {{"method", "euler"}};
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.integrator.method");
}

TEST(SchemaViolation, BlocksForOtherCommandsAreValidatedToo) {
  Json cfg = rotor_config();
  cfg["simulate"] = {{"start", {1, 0}}, {"t1", 1}};
  const auto r = run("check-symmetry", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::schema_violation);
  EXPECT_EQ(error_path(r), "$.simulate.start");
}

TEST(SchemaViolation, BadExpressionsAndTypes) {
  Json cfg = rotor_config();
  cfg["check-symmetry"]["candidates"][0]["xi"][1] = "x1 +";
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.check-symmetry.candidates[0].xi[1]");
  cfg = rotor_config();
  cfg["check-symmetry"]["candidates"][0]["chi"][0]["indices"][0] = 9;
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.check-symmetry.candidates[0].chi[0].indices[0]");
  cfg = rotor_config();
  cfg["system"]["builtin"] = 3;
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.system.builtin");
  cfg = rotor_config();
  cfg["system"]["builtin"] = "pendulum";
  EXPECT_EQ(run("check-symmetry", cfg).exit_code, ExitCode::schema_violation);
  cfg = rotor_config();
  cfg["system"]["dimension"] = 4;
  EXPECT_EQ(error_path(run("check-symmetry", cfg)), "$.system.dimension");
}

TEST(SchemaViolation, NonMonotoneLadder) {
  Json cfg = load("convergence-rk4");
  cfg["convergence"]["h"] = {0.1, 0.05, 0.08};
  const auto r = run("convergence", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::schema_violation);
  EXPECT_EQ(error_path(r), "$.convergence.h[2]");
  EXPECT_NE(r.body["error"]["message"].get<std::string>().find("non-monotone refinement ladder"), std::string::npos);
}

TEST(SchemaViolation, MissingCommandBlockAndUnknownCommand) {
  const auto r = run("simulate", rotor_config());
  EXPECT_EQ(r.exit_code, ExitCode::schema_violation);
  EXPECT_EQ(error_path(r), "$.simulate");
  EXPECT_EQ(run("plot", rotor_config()).exit_code, ExitCode::schema_violation);
}

TEST(SchemaViolation, UnreadableOrInvalidFile) {
  const fs::path dir = fs::temp_directory_path() / "nambu_cli_test";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"system\": ";
  EXPECT_EQ(run_scenario_file("simulate", dir / "bad.json").exit_code, ExitCode::schema_violation);
  EXPECT_EQ(run_scenario_file("simulate", dir / "absent.json").exit_code, ExitCode::schema_violation);
}

TEST(ToleranceFailure, TightOverrideFailsWithExitOne) {
  const auto r = run("invariant", load("rotor-rotation-invariant"), {std::nullopt, 1e-30});
  EXPECT_EQ(r.exit_code, ExitCode::tolerance_failure);
  EXPECT_EQ(r.body["status"], "tolerance_failure");
  EXPECT_EQ(r.body["overrides"]["tol"], 1e-30);
}

TEST(ToleranceFailure, WrongExpectationFails) {
  Json cfg = rotor_config();
  cfg["check-symmetry"]["candidates"][0].erase("chi");
  const auto r = run("check-symmetry", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::tolerance_failure);
  EXPECT_FALSE(r.body["checks"][0]["pass"].get<bool>());
}

TEST(NumericalFailure, RegionExitGivesExitThree) {
  const Json cfg = Json::parse(R"json({
    "system": {"kind": "nambu", "builtin": "linear-shear", "region_half_width": 2},
    "simulate": {"start": [0, 1, 0], "t1": 10}
  })json");
  const auto r = run("simulate", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::numerical_failure);
  EXPECT_EQ(r.body["status"], "numerical_failure");
  EXPECT_NE(r.body["error"]["message"].get<std::string>().find("left the region"), std::string::npos);
}

TEST(Outputs, ReportAndCsvFilesAreWritten) {
  const fs::path dir = fs::temp_directory_path() / "nambu_cli_outputs";
  fs::remove_all(dir);
  const auto r = run("simulate", load("hamiltonian-oscillator"));
  ASSERT_EQ(r.exit_code, ExitCode::pass);
  write_outputs(dir, r, 0.5);
  std::ifstream report(dir / "report.json");
  const Json j = Json::parse(report);
  EXPECT_EQ(j["body"], r.body);
  std::ifstream csv(dir / "trajectory.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "sample,t,x1,x2");
}

TEST(Commands, ConvergenceTableShape) {
  const auto r = run("convergence", load("convergence-rk4"));
  ASSERT_EQ(r.exit_code, ExitCode::pass);
  const auto& table = r.body["results"]["table"];
  ASSERT_EQ(table.size(), 5u);
  EXPECT_TRUE(table[4]["error"].is_null());
  const double order = r.body["results"]["fitted_order"];
  EXPECT_GE(order, 3.8);
  EXPECT_LE(order, 4.2);
}

TEST(Commands, ScalingReportsLambda) {
  const auto r = run("momentum", load("rotor-momentum"));
  ASSERT_EQ(r.exit_code, ExitCode::pass);
  for (const auto& s : r.body["results"]["scaling"])
    EXPECT_NEAR(s["ratio"].get<double>(), s["lambda"].get<double>(), 1e-12);
}

TEST(Commands, SimulateSkipsTimeDependentConservation) {
  const Json cfg = Json::parse(R"json({
    "system": {"kind": "nambu", "hamiltonians": ["(x1^2 + x2^2 + x3^2)/2*(1 + t^2)", "x3"]},
    "simulate": {"start": [1, 0, 0.5], "t1": 1, "conservation_tolerance": 1e-8}
  })json");
  const auto r = run("simulate", cfg);
  EXPECT_EQ(r.exit_code, ExitCode::pass);
  ASSERT_EQ(r.body["warnings"].size(), 1u);
  EXPECT_EQ(r.body["checks"].size(), 1u);
}
