#pragma once

#include <functional>
#include <vector>

#include "mpcrl/common.hpp"
#include "mpcrl/ocp.hpp"
#include "mpcrl/param_layout.hpp"
#include "mpcrl/solver.hpp"

namespace mpcrl::approx {

/// Value of Q or V at one point, its parameter gradient and the first
/// action of the underlying optimal solution.
struct Evaluation {
  double value = 0.0;
  Vector grad;
  Vector action;
  solver::MpcSolution solution;
};

/// Parametric action-value function over a flat parameter vector.
/// Evaluations throw solver::SolverFailure when the underlying problem is
/// not solved to optimality.
class ActionValueModel {
 public:
  virtual ~ActionValueModel() = default;

  virtual const ParamLayout& layout() const = 0;
  virtual std::vector<PdConstraint> pd_blocks() const { return {}; }
  virtual Index state_dim() const = 0;
  virtual Index action_dim() const = 0;

  virtual Evaluation q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
                       const solver::MpcSolution* warm = nullptr) const = 0;
  /// V(s) = min_a Q(s, a); the action field holds the minimizer.
  virtual Evaluation v(const Vector& theta, const Vector& s, bool with_grad,
                       const solver::MpcSolution* warm = nullptr) const = 0;
};

/// Model-based MPC scheme over ThetaNonCondensed.
class NonCondensedMpc final : public ActionValueModel {
 public:
  explicit NonCondensedMpc(ocp::MpcConfig config, solver::SolverSettings settings = {});

  const ParamLayout& layout() const override { return layout_; }
  std::vector<PdConstraint> pd_blocks() const override;
  Index state_dim() const override { return nx_; }
  Index action_dim() const override { return nu_; }
  Evaluation q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;
  Evaluation v(const Vector& theta, const Vector& s, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;

  const ocp::MpcConfig& config() const { return config_; }

 private:
  Evaluation evaluate(const ocp::OcpInstance& problem, bool with_grad, const solver::MpcSolution* warm) const;

  ocp::MpcConfig config_;
  solver::SolverSettings settings_;
  Index nx_;
  Index nu_;
  ParamLayout layout_;
};

/// Condensed quadratic program over ThetaCondensed with a fixed number of
/// constraint rows.
class CondensedMpc final : public ActionValueModel {
 public:
  CondensedMpc(Index nx, Index nu, Index N, Index rows, solver::SolverSettings settings = {});

  const ParamLayout& layout() const override { return layout_; }
  std::vector<PdConstraint> pd_blocks() const override;
  Index state_dim() const override { return nx_; }
  Index action_dim() const override { return nu_; }
  Evaluation q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;
  Evaluation v(const Vector& theta, const Vector& s, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;

  ocp::ThetaCondensed unflatten(const Vector& theta) const;

 private:
  Evaluation evaluate(const ocp::QpInstance& problem, bool with_grad, const solver::MpcSolution* warm) const;

  Index nx_;
  Index nu_;
  Index N_;
  Index rows_;
  solver::SolverSettings settings_;
  ParamLayout layout_;
};

/// Q(s, a) = theta' phi(s, a). V minimizes over a finite candidate set.
class LinearFeatures final : public ActionValueModel {
 public:
  using Features = std::function<Vector(const Vector& s, const Vector& a)>;

  LinearFeatures(Index nx, Index nu, Index num_features, Features phi, std::vector<Vector> candidates = {});

  const ParamLayout& layout() const override { return layout_; }
  Index state_dim() const override { return nx_; }
  Index action_dim() const override { return nu_; }
  Evaluation q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;
  Evaluation v(const Vector& theta, const Vector& s, bool with_grad,
               const solver::MpcSolution* warm = nullptr) const override;

 private:
  Index nx_;
  Index nu_;
  Features phi_;
  std::vector<Vector> candidates_;
  ParamLayout layout_;
};

}  // namespace mpcrl::approx
