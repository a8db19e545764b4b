#pragma once

#include "mpcrl/common.hpp"

/// Analytic linear-quadratic results. Stage cost convention:
/// l(s, a) = [s; a]' [T S; S' R] [s; a], dynamics s+ = A s + B a.
namespace mpcrl::lqr {

/// One-step model-based parametrization (A_hat, B_hat, P_hat).
struct LqrTheta {
  Matrix A_hat;
  Matrix B_hat;
  Matrix P_hat;
};

struct LqrCost {
  Matrix T;
  Matrix S;
  Matrix R;
  double gamma = 1.0;
};

struct RiccatiSettings {
  double tol = 1e-12;
  long max_iter = 100000;
  double residual_tol = 1e-10;
};

/// One application of the discounted Riccati map
/// T + g A'PA - (S + g A'PB)(R + g B'PB)^-1 (S' + g B'PA).
Matrix riccati_map(const Matrix& P, const Matrix& A, const Matrix& B, const LqrCost& cost);

/// Infinity norm of P - riccati_map(P).
double riccati_residual(const Matrix& P, const Matrix& A, const Matrix& B, const LqrCost& cost);

/// Fixed-point value iteration from P = 0. Throws if the iteration cap is
/// reached or the converged residual exceeds settings.residual_tol.
Matrix solve_riccati(const Matrix& A, const Matrix& B, const LqrCost& cost, const RiccatiSettings& settings = {});

/// Hessian of the one-step Q function,
/// [T + g A'PA, S + g A'PB; S' + g B'PA, R + g B'PB].
Matrix q1_matrix(const LqrTheta& theta, const LqrCost& cost);

double q1_exact(const LqrTheta& theta, const LqrCost& cost, const Vector& s, const Vector& a);

/// Zero-horizon value s' P_hat s.
double v0_exact(const LqrTheta& theta, const Vector& s);

/// Exact minimizer gain of q1_exact: K = (R + g B'PB)^-1 (S' + g B'PA), so
/// that pi(s) = -K s.
Matrix gain_from(const LqrTheta& theta, const LqrCost& cost);

/// TD error obtained by bootstrapping with the N-1 horizon value along the
/// true model instead of min_a Q, in closed form:
/// g [s;a]' ([A B]' P [A B] - [A_hat B_hat]' P [A_hat B_hat]) [s;a].
double wrong_td_error(const LqrTheta& theta, const LqrCost& cost, const Matrix& true_A, const Matrix& true_B,
                      const Vector& s, const Vector& a);

/// Parameters with the same Q function: (A/2, B/2, 4P).
LqrTheta scaled_equivalent(const LqrTheta& theta);

/// Spectral radius of a square matrix.
double spectral_radius(const Matrix& M);

}  // namespace mpcrl::lqr
