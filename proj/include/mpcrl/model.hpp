#pragma once

#include "mpcrl/common.hpp"

namespace mpcrl {

/// Discrete-time prediction model x+ = f(x, u) with exact first and second
/// derivatives. Used as the nominal model inside the MPC scheme.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual Index state_dim() const = 0;
  virtual Index input_dim() const = 0;
  virtual Vector next(const Vector& x, const Vector& u) const = 0;
  /// [df/dx  df/du], state_dim x (state_dim + input_dim).
  virtual Matrix jacobian(const Vector& x, const Vector& u) const = 0;
  /// sum_i lambda_i * Hessian of f_i over (x, u).
  virtual Matrix weighted_hessian(const Vector& x, const Vector& u, const Vector& lambda) const = 0;
  virtual bool is_affine() const { return false; }
};

class LinearModel final : public Dynamics {
 public:
  LinearModel(Matrix A, Matrix B);

  Index state_dim() const override { return A_.rows(); }
  Index input_dim() const override { return B_.cols(); }
  Vector next(const Vector& x, const Vector& u) const override { return A_ * x + B_ * u; }
  Matrix jacobian(const Vector& x, const Vector& u) const override;
  Matrix weighted_hessian(const Vector& x, const Vector& u, const Vector& lambda) const override;
  bool is_affine() const override { return true; }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }

 private:
  Matrix A_;
  Matrix B_;
};

}  // namespace mpcrl
