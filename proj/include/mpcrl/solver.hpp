#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "mpcrl/common.hpp"
#include "mpcrl/dense_qp.hpp"

namespace mpcrl::solver {

/// Smooth parametric program
///
///   min_z F(z; theta)  s.t.  c_E(z; theta) = 0,  c_I(z; theta) <= 0
///
/// with Lagrangian L = F + chi' c_E + mu' c_I. Equality rows are ordered
/// (model rows | action pin rows) and inequality rows (state rows | input
/// rows) so that solutions can be split into the named multiplier groups.
class ParametricProblem {
 public:
  virtual ~ParametricProblem() = default;

  virtual Index num_variables() const = 0;
  virtual Index num_equalities() const = 0;
  virtual Index num_inequalities() const = 0;
  virtual Index num_parameters() const = 0;
  /// Trailing equality rows that pin the first action (zeta multipliers).
  virtual Index num_pin_rows() const { return 0; }
  /// Trailing inequality rows that bound the inputs (nu multipliers).
  virtual Index num_input_rows() const { return 0; }
  /// True when every constraint is affine in z.
  virtual bool affine_constraints() const = 0;

  virtual double objective(const Vector& z) const = 0;
  virtual Vector objective_gradient(const Vector& z) const = 0;
  virtual Matrix objective_hessian(const Vector& z) const = 0;
  virtual Vector equalities(const Vector& z) const = 0;
  virtual Matrix equality_jacobian(const Vector& z) const = 0;
  virtual Vector inequalities(const Vector& z) const = 0;
  virtual Matrix inequality_jacobian(const Vector& z) const = 0;
  /// sum_i chi_i * Hessian of c_E,i at z.
  virtual Matrix equality_hessian(const Vector& z, const Vector& chi) const;
  virtual Vector initial_guess() const = 0;

  /// Partial derivative of F with respect to theta at fixed z.
  virtual Vector objective_theta(const Vector& z) const = 0;
  /// d c_E / d theta (rows = equalities).
  virtual Matrix equality_theta(const Vector& z) const = 0;
  /// d c_I / d theta (rows = inequalities).
  virtual Matrix inequality_theta(const Vector& z) const = 0;
  /// d/d theta of grad_z L (rows = variables).
  virtual Matrix lagrangian_gradient_theta(const Vector& z, const Vector& chi, const Vector& mu) const = 0;
};

enum class Status { optimal, unbounded, max_iter, infeasible };

const char* to_string(Status status);

/// Primal-dual solution y = (z, chi, mu, nu, zeta).
struct MpcSolution {
  Vector z_star;
  /// Multipliers of the model equalities (initial state and dynamics).
  Vector chi;
  /// Multipliers of the state / slack inequalities.
  Vector mu;
  /// Multipliers of the input bounds.
  Vector nu;
  /// Multiplier of the first-action pin; empty when the pin is absent.
  Vector zeta;
  double objective = 0.0;
  Status status = Status::max_iter;
  int iterations = 0;
  int qp_iterations = 0;

  Vector equality_multipliers() const;
  Vector inequality_multipliers() const;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;  ///< most negative inequality multiplier, as a positive number
  double scale = 1.0;

  double max() const;
};

struct SolverSettings {
  int max_iter = 100;
  /// Scaled KKT tolerance, see kkt_residuals().
  double tol = 1e-9;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 40;
  QpSettings qp;
  /// Optional CSV stream: iteration,merit,step,kkt.
  std::ostream* log = nullptr;
};

/// SQP with exact Lagrangian Hessian, dense dual active-set QP subproblems
/// and l1-merit backtracking line search.
MpcSolution solve(const ParametricProblem& problem, const MpcSolution* warm_start = nullptr,
                  const SolverSettings& settings = {});

/// Residuals of the KKT system. Stationarity and primal residuals are
/// divided by max(1, |grad F|_inf) so that tolerances are scale-free.
KktResiduals kkt_residuals(const ParametricProblem& problem, const MpcSolution& sol);

/// Gradient of the optimal value with respect to theta evaluated as the
/// parameter gradient of the Lagrangian at the primal-dual solution. The
/// problem must carry the action pin.
Vector grad_q_theta(const ParametricProblem& problem, const MpcSolution& y_star);

/// Same as grad_q_theta for the pin-free problem.
Vector grad_v_theta(const ParametricProblem& problem, const MpcSolution& y_diamond);

/// Jacobian of the primal-dual solution (z, chi | zeta, mu | nu) with respect
/// to theta, one column per parameter, from the implicit function theorem
/// on the KKT conditions. Throws DegeneracyError on weakly active rows or a
/// singular KKT matrix.
Matrix sensitivity_y(const ParametricProblem& problem, const MpcSolution& y_star, double activity_tol = 1e-7);

/// Thrown by gradient routines handed a non-optimal solution.
class SolverFailure : public Error {
 public:
  SolverFailure(std::string what, Status status) : Error(std::move(what)), status_(status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

}  // namespace mpcrl::solver
