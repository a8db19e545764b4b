#include <gtest/gtest.h>

#include <cmath>

#include "mpcrl/lqr.hpp"

namespace mpcrl::lqr {
namespace {

Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(Lqr, ScalarRiccatiMatchesQuadraticRoot) {
  // Scalar DARE with S = 0 reduces to
  //   g b^2 P^2 + (r (1 - g a^2) - g b^2 t) P - t r = 0.
  const double a = 1.2;
  const double b = 0.7;
  const double t = 2.0;
  const double r = 0.3;
  const double g = 0.95;
  const double qa = g * b * b;
  const double qb = r * (1.0 - g * a * a) - g * b * b * t;
  const double qc = -t * r;
  const double P_exact = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);

  const LqrCost cost{mat(1, 1, {t}), mat(1, 1, {0.0}), mat(1, 1, {r}), g};
  const Matrix P = solve_riccati(mat(1, 1, {a}), mat(1, 1, {b}), cost);
  EXPECT_NEAR(P(0, 0), P_exact, 1e-12 * P_exact);
}

TEST(Lqr, ValueEqualsSimulatedClosedLoopCost) {
  const Matrix A = mat(2, 2, {1.0, 0.2, -0.1, 0.9});
  const Matrix B = mat(2, 1, {0.0, 0.5});
  const LqrCost cost{Matrix::Identity(2, 2), mat(2, 1, {0.1, 0.0}), mat(1, 1, {0.4}), 0.9};
  const Matrix P = solve_riccati(A, B, cost);
  const Matrix K = gain_from({A, B, P}, cost);

  Vector s = vec({1.0, -2.0});
  const double v = s.dot(P * s);
  double total = 0.0;
  double discount = 1.0;
  for (int k = 0; k < 2000; ++k) {
    const Vector a = -K * s;
    total += discount * (s.dot(cost.T * s) + 2.0 * s.dot(cost.S * a) + a.dot(cost.R * a));
    s = A * s + B * a;
    discount *= cost.gamma;
  }
  EXPECT_NEAR(total, v, 1e-10 * v);
}

TEST(Lqr, GainMinimizesOneStepQ) {
  const LqrTheta theta{mat(2, 2, {0.5, 1.0, 0.0, 1.1}), mat(2, 2, {1.0, 0.1, 0.0, 0.7}),
                       mat(2, 2, {2.0, 0.3, 0.3, 1.0})};
  const LqrCost cost{Matrix::Identity(2, 2), mat(2, 2, {0.1, 0.0, 0.2, 0.0}), 0.5 * Matrix::Identity(2, 2), 0.8};
  const Matrix K = gain_from(theta, cost);
  const Vector s = vec({0.7, -1.3});
  const Vector a_star = -K * s;
  const double q_star = q1_exact(theta, cost, s, a_star);
  // Any perturbation of the action increases Q.
  for (double da : {-1e-3, 1e-3}) {
    for (Index i = 0; i < 2; ++i) {
      Vector a = a_star;
      a(i) += da;
      EXPECT_GT(q1_exact(theta, cost, s, a), q_star);
    }
  }
  // Stationarity of the quadratic in a.
  const Matrix H = q1_matrix(theta, cost);
  const Vector grad = 2.0 * (H.bottomLeftCorner(2, 2) * s + H.bottomRightCorner(2, 2) * a_star);
  EXPECT_LE(grad.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lqr, RiccatiResidualOnRandomInstances) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + trial % 3;
    Matrix A(n, n);
    Matrix B(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        A(i, j) = 0.5 * rng.normal();
        B(i, j) = rng.normal();
      }
    B += 2.0 * Matrix::Identity(n, n);
    const LqrCost cost{Matrix::Identity(n, n), Matrix::Zero(n, n), Matrix::Identity(n, n), 0.95};
    const Matrix P = solve_riccati(A, B, cost);
    EXPECT_LE(riccati_residual(P, A, B, cost), 1e-10);
  }
}

TEST(Lqr, ScaledParametersGiveTheSameQ) {
  const LqrTheta theta{mat(2, 2, {0.9, 0.3, 0.0, 1.1}), mat(2, 1, {0.1, 1.0}), mat(2, 2, {3.0, 0.5, 0.5, 2.0})};
  const LqrTheta scaled = scaled_equivalent(theta);
  EXPECT_LE((scaled.A_hat - 0.5 * theta.A_hat).norm(), 0.0);
  EXPECT_LE((scaled.P_hat - 4.0 * theta.P_hat).norm(), 0.0);
  const LqrCost cost{Matrix::Identity(2, 2), Matrix::Zero(2, 1), mat(1, 1, {1.0}), 0.9};
  const Vector s = vec({1.5, -0.5});
  const Vector a = vec({0.25});
  const double q = q1_exact(theta, cost, s, a);
  EXPECT_NEAR(q1_exact(scaled, cost, s, a), q, 1e-12 * (1.0 + std::abs(q)));
}

TEST(Lqr, WrongTdErrorMatchesDirectEvaluation) {
  const Matrix A = mat(2, 2, {0.9, 0.3, 0.0, 1.1});
  const Matrix B = mat(2, 1, {0.1, 1.0});
  const LqrTheta theta{mat(2, 2, {0.8, 0.0, 0.1, 1.0}), mat(2, 1, {0.0, 0.9}), mat(2, 2, {3.0, 0.5, 0.5, 2.0})};
  const LqrCost cost{Matrix::Identity(2, 2), Matrix::Zero(2, 1), mat(1, 1, {0.5}), 0.9};
  const Vector s = vec({1.0, 2.0});
  const Vector a = vec({-0.5});
  const double l = s.dot(cost.T * s) + a.dot(cost.R * a);
  const Vector s_next = A * s + B * a;
  const double direct = l + cost.gamma * v0_exact(theta, s_next) - q1_exact(theta, cost, s, a);
  EXPECT_NEAR(wrong_td_error(theta, cost, A, B, s, a), direct, 1e-12 * (1.0 + std::abs(direct)));

  LqrTheta exact = theta;
  exact.A_hat = A;
  exact.B_hat = B;
  EXPECT_NEAR(wrong_td_error(exact, cost, A, B, s, a), 0.0, 1e-12);
}

TEST(Lqr, SpectralRadius) {
  EXPECT_NEAR(spectral_radius(mat(2, 2, {0.0, -2.0, 2.0, 0.0})), 2.0, 1e-14);
  EXPECT_NEAR(spectral_radius(mat(2, 2, {0.5, 10.0, 0.0, -0.7})), 0.7, 1e-14);
}

TEST(Lqr, UnstabilizableSystemIsRejected) {
  // The unstable mode is not reachable and costs something.
  const Matrix A = mat(2, 2, {2.0, 0.0, 0.0, 0.5});
  const Matrix B = mat(2, 1, {0.0, 1.0});
  const LqrCost cost{Matrix::Identity(2, 2), Matrix::Zero(2, 1), mat(1, 1, {1.0}), 1.0};
  EXPECT_THROW(solve_riccati(A, B, cost, {1e-12, 2000, 1e-10}), Error);
}

}  // namespace
}  // namespace mpcrl::lqr
