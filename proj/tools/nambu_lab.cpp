#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "nambu/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nambu-lab: declarative verification scenarios for Nambu and Hamiltonian systems"};
  app.require_subcommand(0, 0);

  std::string command;
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;

  std::string commands_help = "one of:";
  for (const auto& c : nambu::scenario_commands()) commands_help += " " + c;
  app.add_option("command", command, commands_help)->required()->check(CLI::IsMember(nambu::scenario_commands()));
  app.add_option("--config", config, "scenario JSON file")->required();
  app.add_option("--out", out_dir, "output directory for report.json and CSV series")->required();
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--tol", tol, "override the primary tolerance of the command")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(nambu::ExitCode::schema_violation);
  }

  const auto start = std::chrono::steady_clock::now();
  const nambu::RunResult result = nambu::run_scenario_file(command, config, {seed, tol});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    nambu::write_outputs(out_dir, result, wall);
  } catch (const std::exception& e) {
    std::cerr << "nambu-lab: " << e.what() << '\n';
    return static_cast<int>(nambu::ExitCode::numerical_failure);
  }

  const auto& body = result.body;
  if (body.contains("checks")) {
    for (const auto& c : body["checks"]) {
      std::cout << (c["pass"].get<bool>() ? "[PASS] " : "[FAIL] ") << c["name"].get<std::string>() << ": "
                << c["value"].dump() << ' ' << c["op"].get<std::string>() << ' ' << c["bound"].dump() << '\n';
    }
  }
  if (body.contains("warnings"))
    for (const auto& w : body["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
  if (!result.diagnostic.empty()) std::cerr << "nambu-lab: " << result.diagnostic << '\n';
  std::cout << "status: " << body.value("status", "unknown") << " (exit " << static_cast<int>(result.exit_code)
            << ")\n";
  return static_cast<int>(result.exit_code);
}
