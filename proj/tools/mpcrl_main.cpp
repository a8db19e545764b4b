#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli/config.hpp"
#include "cli/experiments.hpp"
#include "mpcrl/csv.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeAbort = 3;

mpcrl::cli::ExperimentConfig load(const std::string& path, const std::optional<std::string>& out,
                                  const std::optional<std::uint64_t>& seed) {
  auto cfg = mpcrl::cli::load_config(path);
  if (out) cfg.run.output = *out;
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning with MPC-based function approximation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> controllers;

  auto* run = app.add_subcommand("run", "Train and write td.csv, theta.csv, trajectory.csv, summary.txt");
  run->add_option("config", config_path, "Experiment config (YAML)")->required();
  run->add_option("--out", out, "Output directory (overrides run.output)");
  run->add_option("--seed", seed, "Random seed (overrides seed)");
  bool progress = false;
  run->add_flag("--progress", progress, "Report each update on stderr");

  auto* compare = app.add_subcommand("compare", "Evaluate controllers on common random numbers");
  compare->add_option("config", config_path, "Experiment config (YAML)")->required();
  compare->add_option("--controllers", controllers, "naive, initial, learned or update:K")
      ->delimiter(',')
      ->required();
  compare->add_option("--out", out, "Output directory holding theta.csv");
  compare->add_option("--seed", seed, "Random seed (overrides seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    auto cfg = load(config_path, out, seed);
    cfg.run.progress = progress;
    if (run->parsed()) {
      const auto report = mpcrl::cli::run_experiment(cfg);
      std::cout << "wrote " << report.output.string() << " (rolling |delta| "
                << mpcrl::csv::number(report.initial_td) << " -> " << mpcrl::csv::number(report.final_td)
                << ")\n";
    } else {
      const auto rows = mpcrl::cli::compare_controllers(cfg, controllers);
      for (const auto& r : rows) {
        std::cout << r.controller << ": average cost " << mpcrl::csv::number(r.stats.average_cost)
                  << ", violations " << mpcrl::csv::number(r.stats.violation_fraction) << ", gain "
                  << mpcrl::csv::number(r.relative_gain_percent) << "%\n";
      }
    }
  } catch (const mpcrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const mpcrl::cli::RunAborted& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return 0;
}
