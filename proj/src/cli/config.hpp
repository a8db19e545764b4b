#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mpcrl/common.hpp"
#include "mpcrl/evaporation.hpp"
#include "mpcrl/learner.hpp"
#include "mpcrl/ocp.hpp"

namespace mpcrl::cli {

struct EnvSection {
  /// "lti" or "evaporation".
  std::string type = "lti";
  double gamma = 0.9;
  Matrix A;
  Matrix B;
  Matrix T;
  Matrix S;
  Matrix R;
  double noise_sigma = 0.0;
  std::optional<Vector> u_lo;
  std::optional<Vector> u_hi;
  std::optional<Vector> initial_state;
  env::EvaporationConfig evaporation;
};

struct MpcSection {
  Index N = 10;
  /// "non-condensed" or "condensed".
  std::string parametrization = "non-condensed";
  std::optional<Matrix> W_s;
  std::optional<Vector> w_s;
  ocp::StateConstraints state_constraints = ocp::StateConstraints::soft;
  /// Prediction model used instead of the true LTI matrices.
  std::optional<Matrix> A_hat;
  std::optional<Matrix> B_hat;
  /// Initial parameters: "naive" (H_l = I) or "identity" (M = I).
  std::string initial = "naive";
  /// Origin of the quadratic cost terms: "origin" or, for the evaporation
  /// benchmark, "nominal" (initial state and its steady input).
  std::string cost_center = "origin";
  int solver_max_iter = 100;
};

struct RunSection {
  long steps = 50000;
  std::string output = "out";
  int eval_episodes = 10;
  long eval_steps = 200;
  long reset_every = 0;
  /// Per-update progress on stderr (command line only).
  bool progress = false;
};

struct ExperimentConfig {
  /// lqr-validation, lqr-learning, wrong-model or evaporation.
  std::string experiment;
  std::uint64_t seed = 0;
  EnvSection env;
  MpcSection mpc;
  learn::LearnerConfig learner;
  RunSection run;
};

/// Parses a YAML experiment description. Throws ConfigError whose message
/// names the source, line and offending field.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

}  // namespace mpcrl::cli
