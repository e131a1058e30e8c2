#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "stmpc/csvlog.hpp"
#include "stmpc/errors.hpp"
#include "stmpc/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

int cmd_run(const std::string& config_path, const std::string& output_dir) {
  try {
    stmpc::ScenarioConfig cfg = stmpc::load_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const stmpc::ScenarioResult result = stmpc::run_scenario(cfg);
    std::cout << "scenario " << cfg.name << " finished: "
              << result.records.size() << " steps, final error "
              << result.final_error << ", feasibility rate "
              << result.feasibility_rate << "\n"
              << "artifacts in " << result.output_dir << "\n";
    return kExitOk;
  } catch (const stmpc::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const stmpc::InitialInfeasible& err) {
    std::cerr << "scenario infeasible: " << err.what() << "\n";
    return kExitInfeasible;
  } catch (const stmpc::InfeasibleProblem& err) {
    std::cerr << "scenario infeasible: " << err.what() << "\n";
    return kExitInfeasible;
  }
}

int cmd_validate(const std::string& config_path) {
  try {
    const stmpc::ScenarioConfig cfg = stmpc::load_config(config_path);
    const auto issues = stmpc::validate_config(cfg);
    if (issues.empty()) {
      std::cout << "config ok: " << cfg.name << "\n";
      const auto rank = stmpc::check_rank_condition(cfg.model);
      std::cout << "rank condition: " << (rank.holds ? "holds" : "fails")
                << " (rank " << rank.rank << ", "
                << (rank.shape == stmpc::SystemShape::square
                        ? "square"
                        : rank.shape == stmpc::SystemShape::flat ? "flat"
                                                                 : "thin")
                << ")\n";
      return kExitOk;
    }
    for (const auto& issue : issues)
      std::cerr << issue.field << ": " << issue.message << "\n";
    return kExitConfig;
  } catch (const stmpc::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  }
}

int cmd_probe(const std::string& config_path) {
  try {
    const stmpc::ScenarioConfig cfg = stmpc::load_config(config_path);
    const auto results = stmpc::run_probe(cfg);
    int feasible = 0;
    for (const auto& r : results) feasible += r.feasible ? 1 : 0;
    std::cout << "probe: " << feasible << "/" << results.size()
              << " grid states feasible; map written to " << cfg.output_dir
              << "/doa.csv\n";
    return kExitOk;
  } catch (const stmpc::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  }
}

int cmd_diagnose(const std::string& csv_path, double s_bound) {
  try {
    const stmpc::CsvTable table = stmpc::read_csv(csv_path);
    const auto records = stmpc::records_from_table(table);
    const stmpc::IssReport report = stmpc::iss_diagnostics(records, s_bound);
    std::cout << report.summary();
    for (const auto& step : report.steps) {
      if (!step.decrease_ok)
        std::cout << "step " << step.k
                  << ": decrease chain violated (slack " << step.decrease_slack
                  << ")\n";
      if (!step.dominance_ok)
        std::cout << "step " << step.k
                  << ": optimal value above candidate (slack "
                  << step.dominance_slack << ")\n";
    }
    return kExitOk;
  } catch (const stmpc::Error& err) {
    std::cerr << "diagnose error: " << err.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-point tracking MPC with penalty-based avoidance"};
  app.require_subcommand(1);

  std::string config_path, output_dir, csv_path;
  double s_bound = 0.0;

  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config_path, "scenario config file")->required();
  run->add_option("--output-dir", output_dir, "override output directory");

  auto* validate = app.add_subcommand("validate", "validate a config");
  validate->add_option("config", config_path, "scenario config file")
      ->required();

  auto* probe = app.add_subcommand(
      "probe-doa", "probe feasibility over the configured state grid");
  probe->add_option("config", config_path, "scenario config file")->required();

  auto* diagnose =
      app.add_subcommand("diagnose", "evaluate monitors on a trajectory log");
  diagnose->add_option("trajectory", csv_path, "trajectory.csv path")
      ->required();
  diagnose->add_option("--s-bound", s_bound, "avoidance cost bound");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, output_dir);
  if (validate->parsed()) return cmd_validate(config_path);
  if (probe->parsed()) return cmd_probe(config_path);
  if (diagnose->parsed()) return cmd_diagnose(csv_path, s_bound);
  return 1;
}
