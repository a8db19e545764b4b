#pragma once

#include <memory>

#include "mpcrl/env.hpp"

/// Evaporation-like process benchmark: two states (X2 product concentration,
/// P2 operating pressure), two controls (P100 steam pressure, F200 cooling
/// water flow) and four exogenous inputs (X1 feed concentration, F1 feed
/// flow, T1 feed temperature, T200 cooling water temperature). The dynamics
/// are an explicit Euler discretization of a lumped mass and energy balance;
/// the economic stage cost prices product flow, steam and cooling water.
namespace mpcrl::env {

struct EvaporationConfig {
  Eigen::Vector4d nominal{5.0, 10.0, 40.0, 25.0};
  Eigen::Vector4d sigma{1.0, 2.0, 8.0, 5.0};
  bool noise = true;
  Eigen::Vector2d x_lo{25.0, 40.0};
  Eigen::Vector2d x_hi{100.0, 80.0};
  Eigen::Vector2d u_lo{100.0, 100.0};
  Eigen::Vector2d u_hi{400.0, 400.0};
  Eigen::Vector2d initial_state{30.0, 50.0};
  double dt = 1.0;
  double gamma = 0.9;
  /// Economic cost is divided by this factor.
  double cost_scale = 1000.0;
  /// Weights of the state-bound violation v in the stage cost,
  /// violation_quadratic * |v|^2 + violation_linear * |v|_1.
  double violation_quadratic = 1.0;
  double violation_linear = 1.0;

  void validate() const;
};

/// Nominal prediction model: exogenous inputs frozen at given values.
class EvaporationModel final : public Dynamics {
 public:
  EvaporationModel(Eigen::Vector4d exogenous, double dt);

  Index state_dim() const override { return 2; }
  Index input_dim() const override { return 2; }
  Vector next(const Vector& x, const Vector& u) const override;
  Matrix jacobian(const Vector& x, const Vector& u) const override;
  Matrix weighted_hessian(const Vector& x, const Vector& u, const Vector& lambda) const override;

 private:
  Eigen::Vector4d exogenous_;
  double dt_;
};

class EvaporationEnv final : public Environment {
 public:
  explicit EvaporationEnv(const EvaporationConfig& config);

  const EvaporationConfig& config() const { return config_; }

  double stage_cost(const Vector& s, const Vector& a) const override;
  Vector transition(const Vector& s, const Vector& a, const Vector& w) const override;
  std::shared_ptr<const Dynamics> nominal_model() const override { return model_; }
  Vector default_initial_state() const override;

  /// Economic part of the stage cost before scaling.
  double economic_cost(const Vector& s, const Vector& a) const;
  /// Componentwise distance of s outside [x_lo, x_hi].
  Vector bound_violation(const Vector& s) const;

  /// Steady state of the nominal model under constant input u (Newton).
  Vector steady_state(const Vector& u) const;
  /// Constant input holding the nominal model at x (Newton).
  Vector steady_input(const Vector& x) const;

 private:
  EvaporationConfig config_;
  std::shared_ptr<const EvaporationModel> model_;
};

std::shared_ptr<EvaporationEnv> make_evaporation_like_env(const EvaporationConfig& config);

}  // namespace mpcrl::env
