#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpcrl/common.hpp"
#include "mpcrl/model.hpp"
#include "mpcrl/param_layout.hpp"
#include "mpcrl/solver.hpp"

namespace mpcrl::ocp {

/// Parameters of the model-based MPC scheme. Quadratics use the Hessian
/// convention q(x) = 0.5 x'Hx + h'x + c; the stage cost acts on w = (x, u).
struct ThetaNonCondensed {
  Matrix H_lambda;
  Vector h_lambda;
  double c_lambda = 0.0;
  Matrix H_Vf;
  Vector h_Vf;
  double c_Vf = 0.0;
  Matrix H_l;
  Vector h_l;
  double c_l = 0.0;
  /// Additive model bias: x+ = f(x, u) + c_f.
  Vector c_f;
  Vector x_lo;
  Vector x_hi;

  Index nx() const { return c_f.size(); }
  Index nu() const { return h_l.size() - c_f.size(); }

  static ParamLayout layout(Index nx, Index nu);
  /// H_l and H_Vf must stay positive definite.
  static std::vector<PdConstraint> pd_blocks(Index nx, Index nu);
  static ThetaNonCondensed zeros(Index nx, Index nu);
  /// H_l = I, the given state bounds, every other block zero.
  static ThetaNonCondensed naive(const Vector& x_lo, const Vector& x_hi, Index nu);
  static ThetaNonCondensed unflatten(const Vector& flat, Index nx, Index nu);
  Vector flatten() const;
  /// Throws DimensionError on inconsistent block sizes.
  void validate() const;
};

/// Parameters of the condensed scheme
///   min_z z'Mz + m'z + c  s.t.  x0 = s, u0 = a, Cz <= d
/// over z = (x0, u0, ..., u_{N-1}).
struct ThetaCondensed {
  Index nx = 0;
  Index nu = 0;
  Index N = 1;
  Matrix M;
  Vector m;
  double c = 0.0;
  Matrix C;
  Vector d;

  Index nz() const { return nx + N * nu; }
  Index rows() const { return C.rows(); }

  static ParamLayout layout(Index nx, Index nu, Index N, Index rows);
  /// The input block of M must stay positive definite.
  static std::vector<PdConstraint> pd_blocks(Index nx, Index nu, Index N);
  static ThetaCondensed unflatten(const Vector& flat, Index nx, Index nu, Index N, Index rows);
  Vector flatten() const;
  void validate() const;
};

enum class StateConstraints { none, soft, hard };

/// Structural settings of the non-condensed scheme that are not learned.
struct MpcConfig {
  std::shared_ptr<const Dynamics> model;
  Index N = 10;
  double gamma = 1.0;
  /// Slack penalty sigma' W_s sigma + w_s' sigma with sigma = (lower, upper)
  /// violations, 2 nx entries per stage.
  Matrix W_s;
  Vector w_s;
  Vector u_lo;
  Vector u_hi;
  StateConstraints constraints = StateConstraints::soft;
  /// Origin (x, u) of the quadratic cost terms; empty means zero. The
  /// arrival and terminal terms use its state part.
  Vector cost_center;

  /// W_s = I, w_s = 1, unbounded inputs.
  static MpcConfig defaults(std::shared_ptr<const Dynamics> model, Index N, double gamma);
  void validate() const;
};

/// One instance of the non-condensed problem. Variables are ordered
/// (x_0..x_N | u_0..u_{N-1} | sigma_0..sigma_N); equalities as
/// (x_0 - s | f(x_k, u_k) + c_f - x_{k+1} | u_0 - a); inequalities as
/// (state rows | slack sign rows | input rows).
class OcpInstance final : public solver::ParametricProblem {
 public:
  OcpInstance(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s, std::optional<Vector> a);

  Index num_variables() const override { return n_; }
  Index num_equalities() const override { return nx_ * (N_ + 1) + (pinned() ? nu_ : 0); }
  Index num_inequalities() const override;
  Index num_parameters() const override { return layout_.size(); }
  Index num_pin_rows() const override { return pinned() ? nu_ : 0; }
  Index num_input_rows() const override { return static_cast<Index>(input_rows_.size()); }
  bool affine_constraints() const override { return config_.model->is_affine(); }

  double objective(const Vector& z) const override;
  Vector objective_gradient(const Vector& z) const override;
  Matrix objective_hessian(const Vector& z) const override;
  Vector equalities(const Vector& z) const override;
  Matrix equality_jacobian(const Vector& z) const override;
  Vector inequalities(const Vector& z) const override;
  Matrix inequality_jacobian(const Vector& z) const override;
  Matrix equality_hessian(const Vector& z, const Vector& chi) const override;
  Vector initial_guess() const override;

  Vector objective_theta(const Vector& z) const override;
  Matrix equality_theta(const Vector& z) const override;
  Matrix inequality_theta(const Vector& z) const override;
  Matrix lagrangian_gradient_theta(const Vector& z, const Vector& chi, const Vector& mu) const override;

  bool pinned() const { return a_.has_value(); }
  const ParamLayout& layout() const { return layout_; }
  Index state_index(Index k) const { return k * nx_; }
  Index input_index(Index k) const { return nx_ * (N_ + 1) + k * nu_; }
  Index slack_index(Index k) const { return nx_ * (N_ + 1) + nu_ * N_ + k * 2 * nx_; }
  Index num_slacks() const { return soft() ? 2 * nx_ * (N_ + 1) : 0; }
  Index num_state_rows() const { return static_cast<Index>(state_rows_.size()); }
  Vector first_action(const Vector& z) const { return z.segment(input_index(0), nu_); }
  Vector slacks(const Vector& z) const { return z.tail(num_slacks()); }

  /// Plain-text summary of dimensions, row structure and parameter blocks.
  std::string debug_string() const;

 private:
  struct BoundRow {
    Index k;
    Index i;
    bool upper;
  };

  bool soft() const { return config_.constraints == StateConstraints::soft; }
  double weight(Index k) const { return discount_[static_cast<std::size_t>(k)]; }
  /// (x_k, u_k) and x_k relative to the cost centre.
  Vector stage_point(const Vector& z, Index k) const;
  Vector state_point(const Vector& z, Index k) const;

  ThetaNonCondensed theta_;
  MpcConfig config_;
  Vector s_;
  std::optional<Vector> a_;
  Index nx_;
  Index nu_;
  Index N_;
  Index n_;
  ParamLayout layout_;
  Matrix Hlam_;
  Matrix Hl_;
  Matrix Hvf_;
  Matrix Ws_;
  Vector center_;
  std::vector<double> discount_;
  std::vector<BoundRow> state_rows_;
  std::vector<BoundRow> input_rows_;
};

OcpInstance build_q_problem(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s, const Vector& a);
OcpInstance build_v_problem(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s);

/// Condensed quadratic program instance, variables z = (x0, u0..u_{N-1}).
/// Inequality rows are Cz - d <= 0, all reported as state rows (mu).
class QpInstance final : public solver::ParametricProblem {
 public:
  QpInstance(const ThetaCondensed& theta, const Vector& s, std::optional<Vector> a);

  Index num_variables() const override { return theta_.nz(); }
  Index num_equalities() const override { return theta_.nx + (pinned() ? theta_.nu : 0); }
  Index num_inequalities() const override { return theta_.rows(); }
  Index num_parameters() const override { return layout_.size(); }
  Index num_pin_rows() const override { return pinned() ? theta_.nu : 0; }
  bool affine_constraints() const override { return true; }

  double objective(const Vector& z) const override;
  Vector objective_gradient(const Vector& z) const override;
  Matrix objective_hessian(const Vector& z) const override;
  Vector equalities(const Vector& z) const override;
  Matrix equality_jacobian(const Vector& z) const override;
  Vector inequalities(const Vector& z) const override;
  Matrix inequality_jacobian(const Vector& z) const override;
  Vector initial_guess() const override;

  Vector objective_theta(const Vector& z) const override;
  Matrix equality_theta(const Vector& z) const override;
  Matrix inequality_theta(const Vector& z) const override;
  Matrix lagrangian_gradient_theta(const Vector& z, const Vector& chi, const Vector& mu) const override;

  bool pinned() const { return a_.has_value(); }
  const ParamLayout& layout() const { return layout_; }
  Vector first_action(const Vector& z) const { return z.segment(theta_.nx, theta_.nu); }

  std::string debug_string() const;

 private:
  ThetaCondensed theta_;
  Matrix Msym_;
  Vector s_;
  std::optional<Vector> a_;
  ParamLayout layout_;
};

QpInstance build_condensed_q(const ThetaCondensed& theta, const Vector& s, const Vector& a);
QpInstance build_condensed_v(const ThetaCondensed& theta, const Vector& s);

/// Condensed parameters encoding the same optimal control problem as the
/// non-condensed scheme on the linear model x+ = A x + B u + c_f. Input
/// bounds (and state bounds in hard mode) become rows of C.
ThetaCondensed condense_lti(const ThetaNonCondensed& theta, const Matrix& A, const Matrix& B, Index N, double gamma,
                            const Vector& u_lo, const Vector& u_hi, StateConstraints constraints);

}  // namespace mpcrl::ocp
