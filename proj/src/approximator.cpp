#include "mpcrl/approximator.hpp"

#include <limits>

namespace mpcrl::approx {

namespace {

void require_optimal(const solver::MpcSolution& sol, const char* what) {
  if (sol.status != solver::Status::optimal) {
    throw solver::SolverFailure(std::string(what) + ": solver returned " + solver::to_string(sol.status), sol.status);
  }
}

}  // namespace

NonCondensedMpc::NonCondensedMpc(ocp::MpcConfig config, solver::SolverSettings settings)
    : config_(std::move(config)), settings_(settings) {
  config_.validate();
  nx_ = config_.model->state_dim();
  nu_ = config_.model->input_dim();
  layout_ = ocp::ThetaNonCondensed::layout(nx_, nu_);
}

std::vector<PdConstraint> NonCondensedMpc::pd_blocks() const {
  return ocp::ThetaNonCondensed::pd_blocks(nx_, nu_);
}

Evaluation NonCondensedMpc::evaluate(const ocp::OcpInstance& problem, bool with_grad,
                                     const solver::MpcSolution* warm) const {
  Evaluation e;
  e.solution = solver::solve(problem, warm, settings_);
  require_optimal(e.solution, problem.pinned() ? "Q evaluation" : "V evaluation");
  e.value = e.solution.objective;
  e.action = problem.first_action(e.solution.z_star);
  if (with_grad) {
    e.grad = problem.pinned() ? solver::grad_q_theta(problem, e.solution) : solver::grad_v_theta(problem, e.solution);
  }
  return e;
}

Evaluation NonCondensedMpc::q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
                              const solver::MpcSolution* warm) const {
  const auto t = ocp::ThetaNonCondensed::unflatten(theta, nx_, nu_);
  return evaluate(ocp::build_q_problem(t, config_, s, a), with_grad, warm);
}

Evaluation NonCondensedMpc::v(const Vector& theta, const Vector& s, bool with_grad,
                              const solver::MpcSolution* warm) const {
  const auto t = ocp::ThetaNonCondensed::unflatten(theta, nx_, nu_);
  return evaluate(ocp::build_v_problem(t, config_, s), with_grad, warm);
}

CondensedMpc::CondensedMpc(Index nx, Index nu, Index N, Index rows, solver::SolverSettings settings)
    : nx_(nx), nu_(nu), N_(N), rows_(rows), settings_(settings) {
  layout_ = ocp::ThetaCondensed::layout(nx, nu, N, rows);
}

std::vector<PdConstraint> CondensedMpc::pd_blocks() const { return ocp::ThetaCondensed::pd_blocks(nx_, nu_, N_); }

ocp::ThetaCondensed CondensedMpc::unflatten(const Vector& theta) const {
  return ocp::ThetaCondensed::unflatten(theta, nx_, nu_, N_, rows_);
}

Evaluation CondensedMpc::evaluate(const ocp::QpInstance& problem, bool with_grad,
                                  const solver::MpcSolution* warm) const {
  Evaluation e;
  e.solution = solver::solve(problem, warm, settings_);
  require_optimal(e.solution, problem.pinned() ? "Q evaluation" : "V evaluation");
  e.value = e.solution.objective;
  e.action = problem.first_action(e.solution.z_star);
  if (with_grad) {
    e.grad = problem.pinned() ? solver::grad_q_theta(problem, e.solution) : solver::grad_v_theta(problem, e.solution);
  }
  return e;
}

Evaluation CondensedMpc::q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
                           const solver::MpcSolution* warm) const {
  return evaluate(ocp::build_condensed_q(unflatten(theta), s, a), with_grad, warm);
}

Evaluation CondensedMpc::v(const Vector& theta, const Vector& s, bool with_grad,
                           const solver::MpcSolution* warm) const {
  return evaluate(ocp::build_condensed_v(unflatten(theta), s), with_grad, warm);
}

LinearFeatures::LinearFeatures(Index nx, Index nu, Index num_features, Features phi, std::vector<Vector> candidates)
    : nx_(nx), nu_(nu), phi_(std::move(phi)), candidates_(std::move(candidates)) {
  layout_.add("theta", num_features);
}

Evaluation LinearFeatures::q(const Vector& theta, const Vector& s, const Vector& a, bool with_grad,
                             const solver::MpcSolution* /*warm*/) const {
  require_dim(theta.size(), layout_.size(), "linear parameter vector");
  const Vector f = phi_(s, a);
  require_dim(f.size(), layout_.size(), "feature vector");
  Evaluation e;
  e.value = theta.dot(f);
  e.action = a;
  if (with_grad) e.grad = f;
  e.solution.status = solver::Status::optimal;
  return e;
}

Evaluation LinearFeatures::v(const Vector& theta, const Vector& s, bool with_grad,
                             const solver::MpcSolution* warm) const {
  if (candidates_.empty()) throw Error("LinearFeatures: no candidate actions for V");
  Evaluation best;
  best.value = std::numeric_limits<double>::infinity();
  for (const Vector& a : candidates_) {
    Evaluation e = q(theta, s, a, with_grad, warm);
    if (e.value < best.value) best = std::move(e);
  }
  return best;
}

}  // namespace mpcrl::approx
