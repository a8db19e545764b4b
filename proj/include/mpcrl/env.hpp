#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "mpcrl/common.hpp"
#include "mpcrl/model.hpp"

namespace mpcrl::env {

/// Per-component Gaussian disturbance, redrawn i.i.d. at every step.
struct NoiseSpec {
  Vector mean;
  Vector stddev;
};

struct EnvSpec {
  Index n_s = 0;
  Index n_a = 0;
  double gamma = 1.0;
  Vector u_lo;
  Vector u_hi;
  std::optional<Vector> x_lo;
  std::optional<Vector> x_hi;
  NoiseSpec noise;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct Transition {
  Vector s;
  Vector a;
  double cost = 0.0;
  Vector s_next;
};

/// Markov decision process with a stage cost and a nominal prediction model.
/// Environments are immutable; rollouts own their state and random stream.
class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  virtual double stage_cost(const Vector& s, const Vector& a) const = 0;
  /// Successor state for an explicit disturbance realization.
  virtual Vector transition(const Vector& s, const Vector& a, const Vector& w) const = 0;
  /// Model the controller is allowed to know (disturbances at their means).
  virtual std::shared_ptr<const Dynamics> nominal_model() const = 0;
  virtual Vector default_initial_state() const = 0;
  /// Random admissible initial state.
  virtual Vector sample_initial_state(Rng& rng) const;

  Vector sample_disturbance(Rng& rng) const;

  /// Draws a disturbance from rng and advances the system.
  Transition step(const Vector& s, const Vector& a, Rng& rng) const;

 private:
  EnvSpec spec_;
};

/// s+ = A s + B a + w, w ~ N(0, sigma^2 I); l(s,a) = [s;a]'[T S; S' R][s;a].
class LtiEnv final : public Environment {
 public:
  LtiEnv(EnvSpec spec, Matrix A, Matrix B, Matrix T, Matrix S, Matrix R);

  double stage_cost(const Vector& s, const Vector& a) const override;
  Vector transition(const Vector& s, const Vector& a, const Vector& w) const override;
  std::shared_ptr<const Dynamics> nominal_model() const override { return model_; }
  Vector default_initial_state() const override;

  const Matrix& A() const { return model_->A(); }
  const Matrix& B() const { return model_->B(); }
  const Matrix& T() const { return T_; }
  const Matrix& S() const { return S_; }
  const Matrix& R() const { return R_; }

 private:
  std::shared_ptr<const LinearModel> model_;
  Matrix T_;
  Matrix S_;
  Matrix R_;
};

/// Optional settings of make_lti_env.
struct LtiOptions {
  std::optional<Vector> u_lo;
  std::optional<Vector> u_hi;
  std::optional<Vector> x_lo;
  std::optional<Vector> x_hi;
};

std::shared_ptr<LtiEnv> make_lti_env(const Matrix& A, const Matrix& B, const Matrix& T, const Matrix& S,
                                     const Matrix& R, double gamma, double noise_sigma, const LtiOptions& options = {});

/// Writes `t,s...,a...,cost` rows.
void write_trajectory_csv(std::ostream& out, const std::vector<Transition>& trajectory);

}  // namespace mpcrl::env
