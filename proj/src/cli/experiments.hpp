#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "mpcrl/approximator.hpp"
#include "mpcrl/env.hpp"
#include "mpcrl/learner.hpp"

namespace mpcrl::cli {

/// Raised when a run stops early; partial outputs have been written.
class RunAborted : public Error {
 public:
  using Error::Error;
};

/// Environment, approximator and initial parameters wired from a config.
struct Setup {
  std::shared_ptr<const env::Environment> environment;
  std::unique_ptr<approx::ActionValueModel> model;
  /// Baseline parameters before any projection.
  Vector theta_naive;
  /// theta_naive projected onto the PD constraints.
  Vector theta0;
};

Setup build_setup(const ExperimentConfig& cfg);

struct RunReport {
  std::filesystem::path output;
  double initial_td = 0.0;
  double final_td = 0.0;
  learn::ClosedLoopStats baseline;
  learn::ClosedLoopStats learned;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains and writes td.csv, theta.csv, updates.csv, trajectory.csv and summary.txt
/// into cfg.run.output. Throws RunAborted after writing partial outputs.
RunReport run_experiment(const ExperimentConfig& cfg);

struct ComparisonRow {
  std::string controller;
  learn::ClosedLoopStats stats;
  /// 100 (J_first - J) / |J_first|.
  double relative_gain_percent = 0.0;
};

/// Evaluates named controllers (naive, initial, learned, update:K) on common
/// random numbers and writes comparison.csv into cfg.run.output.
std::vector<ComparisonRow> compare_controllers(const ExperimentConfig& cfg, const std::vector<std::string>& names);

/// Rows of a theta.csv file, checked against the layout.
std::vector<Vector> read_theta_csv(const std::filesystem::path& path, const ParamLayout& layout);

/// Mean |delta| over the first and the last kRollingWindow samples.
double initial_rolling(const learn::History& history);
double final_rolling(const learn::History& history);

/// Linear feedback gain K with pi(s) ~ -K s, from the greedy actions at the
/// origin and the unit states.
Matrix greedy_gain(const approx::ActionValueModel& model, const Vector& theta);

}  // namespace mpcrl::cli
