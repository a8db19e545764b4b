#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpcrl/approximator.hpp"
#include "mpcrl/common.hpp"
#include "mpcrl/env.hpp"

namespace mpcrl::learn {

/// Where the exploratory Gaussian draw is centred.
enum class ExploreCenter { zero, greedy };

struct LearnerConfig {
  double alpha = 1e-2;
  long n_upd = 500;
  double epsilon = 0.1;
  double explore_sigma = 3.1622776601683795;
  ExploreCenter explore_center = ExploreCenter::zero;
  double pd_eps = 1e-6;
  double gn_tol = 1e-8;
  int gn_max_iter = 50;
  /// Rejected trial steps per iteration, each raising the damping tenfold.
  int max_backtracks = 30;
  double armijo = 1e-4;
  /// Fraction of failed batch elements above which an update is aborted.
  double max_failure_fraction = 0.1;
  /// Parameter blocks held fixed by batch_fit.
  std::vector<std::string> frozen;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// delta = cost + gamma V_theta_tilde(s+) - Q_theta(s, a). Throws
/// solver::SolverFailure naming the failing term.
double td_error(const env::Transition& tr, const Vector& theta, const Vector& theta_tilde,
                const approx::ActionValueModel& model, double gamma);

/// theta + alpha delta grad_q, symmetric blocks re-symmetrized.
Vector standard_update(const ParamLayout& layout, const Vector& theta, double delta, const Vector& grad_q,
                       double alpha);

/// Eigenvalue floor on the listed sub-blocks. Blocks whose smallest
/// eigenvalue is already >= eps are returned bit-identical.
Vector enforce_pd(const ParamLayout& layout, const std::vector<PdConstraint>& constraints, const Vector& theta,
                  double eps);

/// Smallest eigenvalue over the listed sub-blocks (+inf when none).
double min_pd_eigenvalue(const ParamLayout& layout, const std::vector<PdConstraint>& constraints,
                         const Vector& theta);

/// (1 - alpha) theta + alpha theta_star.
Vector mix(const Vector& theta, const Vector& theta_star, double alpha);

/// Epsilon-greedy action: greedy_a with probability 1 - epsilon, otherwise
/// sat(center + sigma e, u_lo, u_hi) with e standard normal per component.
Vector explore(const Vector& greedy_a, const LearnerConfig& cfg, Rng& rng, const Vector& u_lo, const Vector& u_hi);

enum class FitStatus { converged, max_iter, line_search_failed, aborted };

const char* to_string(FitStatus status);

struct BatchFitResult {
  Vector theta;
  FitStatus status = FitStatus::converged;
  int iterations = 0;
  /// 0.5 * sum of squared TD residuals over the retained elements.
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int dropped = 0;
  std::vector<double> cost_history;
};

/// Gauss-Newton step d minimizing |r - J d|^2 + mu |D d|^2 with
/// D = diag(|J_j|). mu = 0 gives the minimum-norm solution.
Vector gauss_newton_step(const Matrix& J, const Vector& r, double mu = 0.0);

/// Constrained batch least-squares fit of Q_theta to the TD targets
/// cost + gamma V_theta_tilde(s+), evaluated once up front.
BatchFitResult batch_fit(const approx::ActionValueModel& model, const std::vector<env::Transition>& batch,
                         const Vector& theta_init, const Vector& theta_tilde, double gamma, const LearnerConfig& cfg);

/// Same fit with precomputed targets; elements with no target are dropped.
BatchFitResult batch_fit_targets(const approx::ActionValueModel& model, const std::vector<env::Transition>& batch,
                                 const std::vector<std::optional<double>>& targets, const Vector& theta_init,
                                 const LearnerConfig& cfg);

struct TrainOptions {
  long steps = 50000;
  std::optional<Vector> initial_state;
  /// Restart from a random admissible state every reset_every steps (0: never).
  long reset_every = 0;
  bool record_trajectory = false;
  /// One line per update when set.
  std::ostream* progress = nullptr;
};

struct UpdateRecord {
  long step = 0;
  FitStatus status = FitStatus::converged;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int dropped = 0;
  double min_pd_eig = 0.0;
};

struct History {
  std::vector<long> steps;
  std::vector<double> deltas;
  /// Mean |delta| over the preceding (at most) 1000 samples.
  std::vector<double> rolling;
  /// theta after each update; entry 0 is the initial parameter.
  std::vector<Vector> thetas;
  std::vector<UpdateRecord> updates;
  std::vector<env::Transition> trajectory;
  long solver_failures = 0;
  bool aborted = false;
  std::string abort_reason;
};

inline constexpr std::size_t kRollingWindow = 1000;

/// Q-learning with batch updates: act, record, every n_upd steps fit,
/// mix, project, refresh the target and clear the window.
History train(const env::Environment& env, const approx::ActionValueModel& model, const Vector& theta0,
              const LearnerConfig& cfg, const TrainOptions& options, Rng& rng);

void write_td_csv(std::ostream& out, const History& history);
void write_theta_csv(std::ostream& out, const ParamLayout& layout, const History& history);

struct ClosedLoopStats {
  double average_cost = 0.0;
  /// Fraction of visited states outside the true state bounds.
  double violation_fraction = 0.0;
  /// Per-component fraction of visited states below the lower bound.
  Vector lower_violation_fraction;
  double max_violation = 0.0;
  long steps = 0;
  long solver_failures = 0;
};

/// Greedy closed loop. Episode e draws its disturbances from Rng(seed + e)
/// so that different controllers see common random numbers.
ClosedLoopStats evaluate_policy(const env::Environment& env, const approx::ActionValueModel& model, const Vector& theta,
                                int episodes, long steps_per_episode, std::uint64_t seed,
                                std::vector<env::Transition>* trajectory = nullptr);

}  // namespace mpcrl::learn
