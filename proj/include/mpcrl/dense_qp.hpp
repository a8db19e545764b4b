#pragma once

#include <vector>

#include "mpcrl/common.hpp"

namespace mpcrl::solver {

/// Dense convex QP
///
///   min  0.5 x'Hx + g'x
///   s.t. A_eq x = b_eq,
///        A_in x <= b_in.
///
/// Equalities are eliminated through a nullspace basis; the remaining
/// inequality-constrained problem is solved with the dual active-set method
/// of Goldfarb and Idnani, which needs the reduced Hessian to be positive
/// definite and no feasible starting point.
struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;
};

enum class QpStatus { optimal, infeasible, nonconvex, max_iter };

struct QpSettings {
  int max_iter = 1000;
  /// Relative feasibility tolerance on inequality rows.
  double feas_tol = 1e-12;
};

/// Multipliers satisfy H x + g + A_eq' y_eq + A_in' y_in = 0 with y_in >= 0.
struct QpResult {
  QpStatus status = QpStatus::max_iter;
  Vector x;
  Vector y_eq;
  Vector y_in;
  double objective = 0.0;
  int iterations = 0;
  std::vector<Index> active;
};

/// active_guess optionally lists inequality rows expected to be active
/// (e.g. from a previous solve); it only affects the starting point.
QpResult solve_qp(const QpProblem& qp, const QpSettings& settings = {},
                  const std::vector<Index>* active_guess = nullptr);

const char* to_string(QpStatus status);

}  // namespace mpcrl::solver
