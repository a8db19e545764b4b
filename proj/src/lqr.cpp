#include "mpcrl/lqr.hpp"

#include <cmath>
#include <sstream>

namespace mpcrl::lqr {

namespace {

void check_cost(const LqrCost& cost, Index ns, Index na) {
  require_dim(cost.T.rows(), ns, "LQR state weight T");
  require_dim(cost.T.cols(), ns, "LQR state weight T");
  require_dim(cost.R.rows(), na, "LQR action weight R");
  require_dim(cost.R.cols(), na, "LQR action weight R");
  require_dim(cost.S.rows(), ns, "LQR cross weight S");
  require_dim(cost.S.cols(), na, "LQR cross weight S");
}

void check_theta(const LqrTheta& theta) {
  const Index ns = theta.A_hat.rows();
  require_dim(theta.A_hat.cols(), ns, "A_hat");
  require_dim(theta.B_hat.rows(), ns, "B_hat");
  require_dim(theta.P_hat.rows(), ns, "P_hat");
  require_dim(theta.P_hat.cols(), ns, "P_hat");
}

Vector stack(const Vector& s, const Vector& a) {
  Vector w(s.size() + a.size());
  w << s, a;
  return w;
}

}  // namespace

Matrix riccati_map(const Matrix& P, const Matrix& A, const Matrix& B, const LqrCost& cost) {
  const double g = cost.gamma;
  const Matrix BtP = B.transpose() * P;
  const Matrix lhs = cost.R + g * BtP * B;
  const Matrix cross = cost.S.transpose() + g * BtP * A;
  const Matrix next = cost.T + g * A.transpose() * P * A - cross.transpose() * lhs.ldlt().solve(cross);
  return symmetric_part(next);
}

double riccati_residual(const Matrix& P, const Matrix& A, const Matrix& B, const LqrCost& cost) {
  return (P - riccati_map(P, A, B, cost)).cwiseAbs().maxCoeff();
}

namespace {

// Policy-evaluation (Newton) steps from a nearly converged P, kept while
// the residual decreases.
Matrix newton_polish(Matrix P, const Matrix& A, const Matrix& B, const LqrCost& cost) {
  const Index n = A.rows();
  double res = riccati_residual(P, A, B, cost);
  for (int k = 0; k < 5 && res > 0.0; ++k) {
    const Matrix G = cost.R + cost.gamma * B.transpose() * P * B;
    const Matrix K = G.ldlt().solve(cost.S.transpose() + cost.gamma * B.transpose() * P * A);
    const Matrix Ac = std::sqrt(cost.gamma) * (A - B * K);
    const Matrix QK = cost.T - cost.S * K - K.transpose() * cost.S.transpose() + K.transpose() * cost.R * K;
    // vec(P) = vec(QK) + (Ac' kron Ac') vec(P)
    Matrix L = Matrix::Identity(n * n, n * n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) L.block(j * n, i * n, n, n) -= Ac(i, j) * Ac.transpose();
    const Vector vp = L.partialPivLu().solve(Eigen::Map<const Vector>(QK.data(), n * n));
    const Matrix next = symmetric_part(Eigen::Map<const Matrix>(vp.data(), n, n));
    const double next_res = riccati_residual(next, A, B, cost);
    if (!(next_res < res)) break;
    P = next;
    res = next_res;
  }
  return P;
}

}  // namespace

Matrix solve_riccati(const Matrix& A, const Matrix& B, const LqrCost& cost, const RiccatiSettings& settings) {
  const Index ns = A.rows();
  require_dim(A.cols(), ns, "A");
  require_dim(B.rows(), ns, "B");
  check_cost(cost, ns, B.cols());
  if (cost.R.llt().info() != Eigen::Success) throw Error("solve_riccati: R must be positive definite");

  Matrix P = Matrix::Zero(ns, ns);
  for (long it = 0; it < settings.max_iter; ++it) {
    const Matrix next = riccati_map(P, A, B, cost);
    if (!next.allFinite()) throw Error("solve_riccati: value iteration diverged");
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change <= settings.tol * (1.0 + P.cwiseAbs().maxCoeff())) {
      P = newton_polish(symmetric_part(P), A, B, cost);
      const double res = riccati_residual(P, A, B, cost);
      if (res > settings.residual_tol) {
        std::ostringstream msg;
        msg << "solve_riccati: converged iterate has residual " << res;
        throw Error(msg.str());
      }
      return P;
    }
  }
  throw Error("solve_riccati: no convergence within " + std::to_string(settings.max_iter) + " iterations");
}

Matrix q1_matrix(const LqrTheta& theta, const LqrCost& cost) {
  check_theta(theta);
  const Index ns = theta.A_hat.rows();
  const Index na = theta.B_hat.cols();
  check_cost(cost, ns, na);
  const double g = cost.gamma;
  const Matrix& A = theta.A_hat;
  const Matrix& B = theta.B_hat;
  const Matrix& P = theta.P_hat;
  Matrix M(ns + na, ns + na);
  M.topLeftCorner(ns, ns) = cost.T + g * A.transpose() * P * A;
  M.topRightCorner(ns, na) = cost.S + g * A.transpose() * P * B;
  M.bottomLeftCorner(na, ns) = cost.S.transpose() + g * B.transpose() * P * A;
  M.bottomRightCorner(na, na) = cost.R + g * B.transpose() * P * B;
  return M;
}

double q1_exact(const LqrTheta& theta, const LqrCost& cost, const Vector& s, const Vector& a) {
  require_dim(s.size(), theta.A_hat.rows(), "state");
  require_dim(a.size(), theta.B_hat.cols(), "action");
  const Vector w = stack(s, a);
  return w.dot(q1_matrix(theta, cost) * w);
}

double v0_exact(const LqrTheta& theta, const Vector& s) {
  require_dim(s.size(), theta.P_hat.rows(), "state");
  return s.dot(theta.P_hat * s);
}

Matrix gain_from(const LqrTheta& theta, const LqrCost& cost) {
  const Matrix M = q1_matrix(theta, cost);
  const Index ns = theta.A_hat.rows();
  const Index na = theta.B_hat.cols();
  const Matrix Ruu = symmetric_part(M.bottomRightCorner(na, na));
  Eigen::FullPivLU<Matrix> lu(Ruu);
  if (!lu.isInvertible()) throw Error("gain_from: R + gamma B'PB is singular");
  return lu.solve(M.bottomLeftCorner(na, ns));
}

double wrong_td_error(const LqrTheta& theta, const LqrCost& cost, const Matrix& true_A, const Matrix& true_B,
                      const Vector& s, const Vector& a) {
  check_theta(theta);
  require_dim(true_A.rows(), theta.A_hat.rows(), "true A");
  require_dim(true_B.cols(), theta.B_hat.cols(), "true B");
  const Index ns = theta.A_hat.rows();
  const Index na = theta.B_hat.cols();
  Matrix F(ns, ns + na), Fh(ns, ns + na);
  F << true_A, true_B;
  Fh << theta.A_hat, theta.B_hat;
  const Vector w = stack(s, a);
  const Matrix D = F.transpose() * theta.P_hat * F - Fh.transpose() * theta.P_hat * Fh;
  return cost.gamma * w.dot(D * w);
}

LqrTheta scaled_equivalent(const LqrTheta& theta) {
  return {0.5 * theta.A_hat, 0.5 * theta.B_hat, 4.0 * theta.P_hat};
}

double spectral_radius(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace mpcrl::lqr
