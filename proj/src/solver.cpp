#include "mpcrl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mpcrl::solver {

Matrix ParametricProblem::equality_hessian(const Vector& /*z*/, const Vector& /*chi*/) const {
  return Matrix::Zero(num_variables(), num_variables());
}

const char* to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::unbounded: return "unbounded";
    case Status::max_iter: return "max_iter";
    case Status::infeasible: return "infeasible";
  }
  return "unknown";
}

Vector MpcSolution::equality_multipliers() const {
  Vector out(chi.size() + zeta.size());
  out << chi, zeta;
  return out;
}

Vector MpcSolution::inequality_multipliers() const {
  Vector out(mu.size() + nu.size());
  out << mu, nu;
  return out;
}

double KktResiduals::max() const { return std::max({stationarity, primal, complementarity, dual}); }

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double positive_part_l1(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseMax(0.0).sum(); }

void split_multipliers(const ParametricProblem& p, const Vector& eq, const Vector& in, MpcSolution& sol) {
  const Index n_pin = p.num_pin_rows();
  const Index n_inp = p.num_input_rows();
  sol.chi = eq.head(eq.size() - n_pin);
  sol.zeta = eq.tail(n_pin);
  sol.mu = in.head(in.size() - n_inp);
  sol.nu = in.tail(n_inp);
}

KktResiduals residuals_at(const Vector& g, const Vector& cE, const Matrix& JE, const Vector& cI, const Matrix& JI,
                          const Vector& z, const Vector& chi, const Vector& mu) {
  KktResiduals r;
  r.scale = std::max(1.0, inf_norm(g));
  Vector stat = g;
  if (cE.size() > 0) stat += JE.transpose() * chi;
  if (cI.size() > 0) stat += JI.transpose() * mu;
  r.stationarity = inf_norm(stat) / r.scale;
  const double zscale = std::max(1.0, inf_norm(z));
  r.primal = std::max(inf_norm(cE), cI.size() > 0 ? std::max(0.0, cI.maxCoeff()) : 0.0) / zscale;
  r.complementarity = cI.size() > 0 ? inf_norm(mu.cwiseProduct(cI)) / r.scale : 0.0;
  r.dual = mu.size() > 0 ? std::max(0.0, -mu.minCoeff()) / r.scale : 0.0;
  return r;
}

}  // namespace

KktResiduals kkt_residuals(const ParametricProblem& problem, const MpcSolution& sol) {
  const Vector& z = sol.z_star;
  return residuals_at(problem.objective_gradient(z), problem.equalities(z), problem.equality_jacobian(z),
                      problem.inequalities(z), problem.inequality_jacobian(z), z, sol.equality_multipliers(),
                      sol.inequality_multipliers());
}

MpcSolution solve(const ParametricProblem& problem, const MpcSolution* warm_start, const SolverSettings& settings) {
  const Index n = problem.num_variables();
  const Index me = problem.num_equalities();
  const Index mi = problem.num_inequalities();

  Vector z = problem.initial_guess();
  Vector chi = Vector::Zero(me);
  Vector mu = Vector::Zero(mi);
  // Inequality rows expected active; seeds each QP.
  std::vector<Index> working;
  if (warm_start != nullptr && warm_start->z_star.size() == n) {
    z = warm_start->z_star;
    const Vector eq = warm_start->equality_multipliers();
    const Vector in = warm_start->inequality_multipliers();
    if (eq.size() == me) chi = eq;
    if (in.size() == mi) {
      mu = in.cwiseMax(0.0);
      for (Index i = 0; i < mi; ++i) {
        if (mu(i) > 0.0) working.push_back(i);
      }
    }
  }
  require_dim(z.size(), n, "initial guess");

  MpcSolution sol;
  sol.status = Status::max_iter;
  double rho = 0.0;
  const bool affine = problem.affine_constraints();

  if (settings.log != nullptr) *settings.log << "iteration,merit,step,kkt\n";

  for (int it = 0; it < settings.max_iter; ++it) {
    const Vector g = problem.objective_gradient(z);
    const Vector cE = problem.equalities(z);
    const Matrix JE = problem.equality_jacobian(z);
    const Vector cI = problem.inequalities(z);
    const Matrix JI = problem.inequality_jacobian(z);
    const KktResiduals kkt = residuals_at(g, cE, JE, cI, JI, z, chi, mu);
    sol.iterations = it;
    if (kkt.max() <= settings.tol) {
      sol.status = Status::optimal;
      break;
    }

    Matrix H = problem.objective_hessian(z);
    if (!affine) H += problem.equality_hessian(z, chi);
    H = symmetric_part(H);

    QpProblem qp{H, g, JE, -cE, JI, -cI};
    QpResult qr = solve_qp(qp, settings.qp, &working);
    sol.qp_iterations += qr.iterations;
    if (qr.status == QpStatus::nonconvex && !affine) {
      // Inertia correction on the Lagrangian Hessian.
      const double base = std::max(1.0, H.cwiseAbs().maxCoeff());
      for (double tau = 1e-8 * base; tau <= 1e8 * base && qr.status == QpStatus::nonconvex; tau *= 10.0) {
        qp.H = H + tau * Matrix::Identity(n, n);
        qr = solve_qp(qp, settings.qp, &working);
        sol.qp_iterations += qr.iterations;
      }
    }
    if (qr.status == QpStatus::nonconvex) {
      sol.status = Status::unbounded;
      break;
    }
    if (qr.status == QpStatus::infeasible) {
      sol.status = Status::infeasible;
      break;
    }
    if (qr.status == QpStatus::max_iter) {
      sol.status = Status::max_iter;
      break;
    }

    working = qr.active;
    const Vector& d = qr.x;
    rho = std::max(rho, 1.1 * std::max(inf_norm(qr.y_eq), inf_norm(qr.y_in)) + 1e-8);
    auto merit = [&](const Vector& zz, double f) {
      return f + rho * (problem.equalities(zz).lpNorm<1>() + positive_part_l1(problem.inequalities(zz)));
    };
    const double f0 = problem.objective(z);
    const double phi0 = f0 + rho * (cE.lpNorm<1>() + positive_part_l1(cI));
    const double dphi = g.dot(d) - rho * (cE.lpNorm<1>() + positive_part_l1(cI));
    // Round-off level of the merit: constraint values carry errors of order
    // eps |z|, amplified by rho.
    const double slack =
        100.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0) + rho * (1.0 + z.lpNorm<1>()));
    double t = 1.0;
    Vector trial = z + d;
    double phi = merit(trial, problem.objective(trial));
    if (!affine && phi > phi0 + settings.armijo * std::min(dphi, 0.0) + slack && JE.rows() > 0) {
      // Second-order correction: minimum-norm fix of the equality residual at z + d.
      const Vector cE_trial = problem.equalities(trial);
      const Vector corr = -JE.transpose() * (JE * JE.transpose()).ldlt().solve(cE_trial);
      const Vector soc = trial + corr;
      const double phi_soc = merit(soc, problem.objective(soc));
      if (corr.allFinite() && phi_soc <= phi0 + settings.armijo * std::min(dphi, 0.0) + slack) {
        trial = soc;
        phi = phi_soc;
      }
    }
    int backtracks = 0;
    while (phi > phi0 + settings.armijo * t * std::min(dphi, 0.0) + slack && backtracks < settings.max_backtracks) {
      t *= settings.backtrack;
      trial = z + t * d;
      phi = merit(trial, problem.objective(trial));
      ++backtracks;
    }
    z = trial;
    chi += t * (qr.y_eq - chi);
    mu += t * (qr.y_in - mu);
    if (settings.log != nullptr) *settings.log << it << ',' << phi << ',' << t << ',' << kkt.max() << '\n';
  }

  if (sol.status == Status::max_iter && sol.iterations == settings.max_iter - 1) {
    // Final check after the last step.
    const KktResiduals kkt = residuals_at(problem.objective_gradient(z), problem.equalities(z),
                                          problem.equality_jacobian(z), problem.inequalities(z),
                                          problem.inequality_jacobian(z), z, chi, mu);
    if (kkt.max() <= settings.tol) sol.status = Status::optimal;
  }

  sol.z_star = z;
  split_multipliers(problem, chi, mu, sol);
  sol.objective = problem.objective(z);
  return sol;
}

namespace {

void require_optimal(const MpcSolution& sol, const char* what) {
  if (sol.status != Status::optimal) {
    throw SolverFailure(std::string(what) + ": solution status is " + to_string(sol.status), sol.status);
  }
}

Vector lagrangian_theta(const ParametricProblem& problem, const MpcSolution& sol) {
  const Vector& z = sol.z_star;
  Vector grad = problem.objective_theta(z);
  if (problem.num_equalities() > 0) grad += problem.equality_theta(z).transpose() * sol.equality_multipliers();
  if (problem.num_inequalities() > 0) {
    grad += problem.inequality_theta(z).transpose() * sol.inequality_multipliers();
  }
  return grad;
}

}  // namespace

Vector grad_q_theta(const ParametricProblem& problem, const MpcSolution& y_star) {
  require_optimal(y_star, "grad_q_theta");
  if (problem.num_pin_rows() == 0) throw Error("grad_q_theta: problem has no action pin");
  return lagrangian_theta(problem, y_star);
}

Vector grad_v_theta(const ParametricProblem& problem, const MpcSolution& y_diamond) {
  require_optimal(y_diamond, "grad_v_theta");
  if (problem.num_pin_rows() != 0) throw Error("grad_v_theta: problem carries an action pin");
  return lagrangian_theta(problem, y_diamond);
}

Matrix sensitivity_y(const ParametricProblem& problem, const MpcSolution& y_star, double activity_tol) {
  require_optimal(y_star, "sensitivity_y");
  const Vector& z = y_star.z_star;
  const Vector chi = y_star.equality_multipliers();
  const Vector mu = y_star.inequality_multipliers();
  const Index n = problem.num_variables();
  const Index me = problem.num_equalities();
  const Index mi = problem.num_inequalities();
  const Index np = problem.num_parameters();

  const Vector cI = problem.inequalities(z);
  std::vector<Index> active;
  for (Index i = 0; i < mi; ++i) {
    if (mu(i) > activity_tol) {
      active.push_back(i);
    } else if (cI(i) >= -activity_tol) {
      throw DegeneracyError("sensitivity_y: inequality row " + std::to_string(i) +
                            " is weakly active (strict complementarity fails)");
    }
  }
  const Index na = static_cast<Index>(active.size());

  const Matrix JE = problem.equality_jacobian(z);
  const Matrix JI = problem.inequality_jacobian(z);
  const Matrix Itheta = problem.inequality_theta(z);
  Matrix JA(na, n);
  Matrix Atheta(na, np);
  for (Index k = 0; k < na; ++k) {
    JA.row(k) = JI.row(active[static_cast<std::size_t>(k)]);
    Atheta.row(k) = Itheta.row(active[static_cast<std::size_t>(k)]);
  }

  Matrix H = problem.objective_hessian(z) + problem.equality_hessian(z, chi);
  H = symmetric_part(H);

  const Index dim = n + me + na;
  Matrix K = Matrix::Zero(dim, dim);
  K.topLeftCorner(n, n) = H;
  K.block(0, n, n, me) = JE.transpose();
  K.block(n, 0, me, n) = JE;
  K.block(0, n + me, n, na) = JA.transpose();
  K.block(n + me, 0, na, n) = JA;

  Matrix rhs(dim, np);
  rhs.topRows(n) = -problem.lagrangian_gradient_theta(z, chi, mu);
  rhs.middleRows(n, me) = -problem.equality_theta(z);
  rhs.bottomRows(na) = -Atheta;

  Eigen::FullPivLU<Matrix> lu(K);
  if (lu.rank() < dim) throw DegeneracyError("sensitivity_y: KKT matrix is singular");
  const Matrix dsol = lu.solve(rhs);

  Matrix out = Matrix::Zero(n + me + mi, np);
  out.topRows(n + me) = dsol.topRows(n + me);
  for (Index k = 0; k < na; ++k) out.row(n + me + active[static_cast<std::size_t>(k)]) = dsol.row(n + me + k);
  return out;
}

}  // namespace mpcrl::solver
