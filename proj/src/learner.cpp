#include "mpcrl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

#include "mpcrl/csv.hpp"

namespace mpcrl::learn {

void LearnerConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (n_upd < 1) throw ConfigError("n_upd must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(explore_sigma >= 0.0)) throw ConfigError("explore_sigma must be nonnegative");
  if (!(pd_eps > 0.0)) throw ConfigError("pd_eps must be positive");
  if (!(gn_tol > 0.0)) throw ConfigError("gn_tol must be positive");
  if (gn_max_iter < 1) throw ConfigError("gn_max_iter must be positive");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw ConfigError("max_failure_fraction must lie in [0, 1]");
  }
}

double td_error(const env::Transition& tr, const Vector& theta, const Vector& theta_tilde,
                const approx::ActionValueModel& model, double gamma) {
  double target = 0.0;
  try {
    target = model.v(theta_tilde, tr.s_next, false).value;
  } catch (const solver::SolverFailure& e) {
    throw solver::SolverFailure(std::string("td_error: target term V(s+) failed: ") + e.what(), e.status());
  }
  double q = 0.0;
  try {
    q = model.q(theta, tr.s, tr.a, false).value;
  } catch (const solver::SolverFailure& e) {
    throw solver::SolverFailure(std::string("td_error: Q(s, a) term failed: ") + e.what(), e.status());
  }
  return tr.cost + gamma * target - q;
}

Vector standard_update(const ParamLayout& layout, const Vector& theta, double delta, const Vector& grad_q,
                       double alpha) {
  require_dim(theta.size(), layout.size(), "parameter vector");
  require_dim(grad_q.size(), layout.size(), "gradient");
  Vector out = theta + alpha * delta * grad_q;
  layout.symmetrize(out);
  return out;
}

namespace {

Eigen::Map<Matrix> block_map(const ParamLayout& layout, Vector& flat, const std::string& name) {
  const auto& b = layout.block(name);
  return Eigen::Map<Matrix>(flat.data() + b.offset, b.rows, b.cols);
}

bool is_frozen(const LearnerConfig& cfg, const std::string& name) {
  return std::find(cfg.frozen.begin(), cfg.frozen.end(), name) != cfg.frozen.end();
}

// Infinite entries (unbounded state limits) are skipped.
double inf_norm(const Vector& v) {
  double out = 0.0;
  for (const double x : v) {
    if (std::isfinite(x)) out = std::max(out, std::abs(x));
  }
  return out;
}

}  // namespace

Vector enforce_pd(const ParamLayout& layout, const std::vector<PdConstraint>& constraints, const Vector& theta,
                  double eps) {
  require_dim(theta.size(), layout.size(), "parameter vector");
  Vector out = theta;
  for (const auto& c : constraints) {
    auto full = block_map(layout, out, c.block);
    const Matrix sub = symmetric_part(full.block(c.start, c.start, c.size, c.size));
    Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
    if (es.eigenvalues().minCoeff() >= eps) continue;
    const Vector clipped = es.eigenvalues().cwiseMax(eps);
    const Matrix fixed = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    full.block(c.start, c.start, c.size, c.size) = symmetric_part(fixed);
  }
  return out;
}

double min_pd_eigenvalue(const ParamLayout& layout, const std::vector<PdConstraint>& constraints,
                         const Vector& theta) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) {
    const Matrix full = layout.get(theta, c.block);
    const Matrix sub = symmetric_part(full.block(c.start, c.start, c.size, c.size));
    m = std::min(m, Eigen::SelfAdjointEigenSolver<Matrix>(sub).eigenvalues().minCoeff());
  }
  return m;
}

Vector mix(const Vector& theta, const Vector& theta_star, double alpha) {
  require_dim(theta_star.size(), theta.size(), "mixed parameter vector");
  Vector out(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    out(i) = theta(i) == theta_star(i) ? theta(i) : (1.0 - alpha) * theta(i) + alpha * theta_star(i);
  }
  return out;
}

Vector explore(const Vector& greedy_a, const LearnerConfig& cfg, Rng& rng, const Vector& u_lo, const Vector& u_hi) {
  require_dim(u_lo.size(), greedy_a.size(), "u_lo");
  require_dim(u_hi.size(), greedy_a.size(), "u_hi");
  if (cfg.epsilon <= 0.0) return greedy_a;
  if (cfg.epsilon < 1.0 && rng.uniform() >= cfg.epsilon) return greedy_a;
  Vector a(greedy_a.size());
  for (Index i = 0; i < a.size(); ++i) {
    const double center = cfg.explore_center == ExploreCenter::greedy ? greedy_a(i) : 0.0;
    a(i) = std::clamp(center + cfg.explore_sigma * rng.normal(), u_lo(i), u_hi(i));
  }
  return a;
}

const char* to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iter: return "max_iter";
    case FitStatus::line_search_failed: return "line_search_failed";
    case FitStatus::aborted: return "aborted";
  }
  return "unknown";
}

Vector gauss_newton_step(const Matrix& J, const Vector& r, double mu) {
  require_dim(r.size(), J.rows(), "residual vector");
  if (J.rows() == 0 || J.cols() == 0) return Vector::Zero(J.cols());
  if (mu <= 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(J);
    return cod.solve(r);
  }
  // Marquardt scaling: damp each column relative to its own curvature.
  const Index n = J.cols();
  const Vector curv = J.colwise().squaredNorm().transpose();
  const double floor = 1e-12 * std::max(1.0, curv.maxCoeff());
  Matrix A(J.rows() + n, n);
  A.topRows(J.rows()) = J;
  A.bottomRows(n) = (mu * curv.cwiseMax(floor)).cwiseSqrt().asDiagonal();
  Vector b = Vector::Zero(J.rows() + n);
  b.head(J.rows()) = r;
  return A.colPivHouseholderQr().solve(b);
}

namespace {

constexpr double kInitialDamping = 1e-4;
constexpr double kDampingIncrease = 10.0;

struct BatchState {
  Vector q;
  Matrix J;
  std::vector<solver::MpcSolution> warm;
  bool ok = true;
};

/// Q values and gradients at theta for the retained elements.
BatchState evaluate_batch(const approx::ActionValueModel& model, const std::vector<env::Transition>& batch,
                          const std::vector<std::size_t>& idx, const Vector& theta,
                          const std::vector<solver::MpcSolution>* warm, std::vector<bool>* failed) {
  BatchState st;
  const auto n = static_cast<Index>(idx.size());
  st.q.resize(n);
  st.J.resize(n, theta.size());
  st.warm.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& tr = batch[idx[k]];
    try {
      const solver::MpcSolution* w = warm != nullptr ? &(*warm)[k] : nullptr;
      approx::Evaluation e = model.q(theta, tr.s, tr.a, true, w);
      st.q(static_cast<Index>(k)) = e.value;
      st.J.row(static_cast<Index>(k)) = e.grad.transpose();
      st.warm[k] = std::move(e.solution);
    } catch (const solver::SolverFailure&) {
      st.ok = false;
      if (failed == nullptr) return st;
      (*failed)[k] = true;
    }
  }
  return st;
}

}  // namespace

BatchFitResult batch_fit_targets(const approx::ActionValueModel& model, const std::vector<env::Transition>& batch,
                                 const std::vector<std::optional<double>>& targets, const Vector& theta_init,
                                 const LearnerConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw Error("batch_fit: empty batch");
  if (targets.size() != batch.size()) throw DimensionError("batch_fit: one target per transition required");
  const ParamLayout& layout = model.layout();
  require_dim(theta_init.size(), layout.size(), "parameter vector");

  Vector free_mask = Vector::Ones(layout.size());
  for (const auto& name : cfg.frozen) {
    const auto& b = layout.block(name);
    free_mask.segment(b.offset, b.size()).setZero();
  }
  std::vector<PdConstraint> pd;
  for (const auto& c : model.pd_blocks()) {
    if (!is_frozen(cfg, c.block)) pd.push_back(c);
  }
  auto project = [&](Vector th) {
    layout.symmetrize(th);
    return enforce_pd(layout, pd, th, cfg.pd_eps);
  };

  BatchFitResult res;
  res.theta = theta_init;

  // Elements without a target or whose Q problem fails at theta_init are dropped.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (targets[i].has_value()) {
      candidates.push_back(i);
    } else {
      ++res.dropped;
    }
  }
  std::vector<bool> failed(candidates.size(), false);
  BatchState st = evaluate_batch(model, batch, candidates, theta_init, nullptr, &failed);
  std::vector<std::size_t> idx;
  std::vector<std::size_t> keep_rows;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (failed[k]) {
      ++res.dropped;
    } else {
      idx.push_back(candidates[k]);
      keep_rows.push_back(k);
    }
  }
  if (static_cast<double>(res.dropped) > cfg.max_failure_fraction * static_cast<double>(batch.size()) ||
      idx.empty()) {
    res.status = FitStatus::aborted;
    return res;
  }
  if (keep_rows.size() != candidates.size()) {
    BatchState kept;
    kept.q.resize(static_cast<Index>(keep_rows.size()));
    kept.J.resize(static_cast<Index>(keep_rows.size()), st.J.cols());
    for (std::size_t k = 0; k < keep_rows.size(); ++k) {
      kept.q(static_cast<Index>(k)) = st.q(static_cast<Index>(keep_rows[k]));
      kept.J.row(static_cast<Index>(k)) = st.J.row(static_cast<Index>(keep_rows[k]));
      kept.warm.push_back(std::move(st.warm[keep_rows[k]]));
    }
    st = std::move(kept);
  }

  Vector y(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) y(static_cast<Index>(k)) = *targets[idx[k]];

  Vector theta = theta_init;
  Vector r = y - st.q;
  double f = 0.5 * r.squaredNorm();
  res.initial_cost = f;
  res.cost_history.push_back(f);
  res.status = FitStatus::max_iter;

  double mu = 0.0;
  for (int it = 0; it < cfg.gn_max_iter; ++it) {
    if (f == 0.0) {
      res.status = FitStatus::converged;
      break;
    }
    const Matrix J = st.J * free_mask.asDiagonal();
    bool accepted = false;
    Vector trial;
    BatchState trial_state;
    double f_trial = 0.0;
    for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt) {
      const Vector d = gauss_newton_step(J, r, mu);
      if (mu == 0.0 && inf_norm(d) <= cfg.gn_tol * (1.0 + inf_norm(theta))) break;
      const double predicted = f - 0.5 * (r - J * d).squaredNorm();
      trial = project(theta + d);
      trial_state = evaluate_batch(model, batch, idx, trial, &st.warm, nullptr);
      if (trial_state.ok) {
        f_trial = 0.5 * (y - trial_state.q).squaredNorm();
        if (f_trial <= f - cfg.armijo * std::max(predicted, 0.0) && f_trial < f) {
          accepted = true;
          break;
        }
      }
      mu = mu == 0.0 ? kInitialDamping : mu * kDampingIncrease;
    }
    if (!accepted) {
      res.status = mu == 0.0 ? FitStatus::converged : FitStatus::line_search_failed;
      break;
    }
    mu = mu / kDampingIncrease < kInitialDamping ? 0.0 : mu / kDampingIncrease;
    const double step = inf_norm(trial - theta);
    const double f_old = f;
    theta = trial;
    st = std::move(trial_state);
    r = y - st.q;
    f = f_trial;
    res.iterations = it + 1;
    res.cost_history.push_back(f);
    if (step <= cfg.gn_tol * (1.0 + inf_norm(theta)) || f_old - f <= cfg.gn_tol * f_old) {
      res.status = FitStatus::converged;
      break;
    }
  }
  res.theta = theta;
  res.final_cost = f;
  return res;
}

BatchFitResult batch_fit(const approx::ActionValueModel& model, const std::vector<env::Transition>& batch,
                         const Vector& theta_init, const Vector& theta_tilde, double gamma, const LearnerConfig& cfg) {
  std::vector<std::optional<double>> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      targets[i] = batch[i].cost + gamma * model.v(theta_tilde, batch[i].s_next, false).value;
    } catch (const solver::SolverFailure&) {
      targets[i].reset();
    }
  }
  return batch_fit_targets(model, batch, targets, theta_init, cfg);
}

History train(const env::Environment& env, const approx::ActionValueModel& model, const Vector& theta0,
              const LearnerConfig& cfg, const TrainOptions& options, Rng& rng) {
  cfg.validate();
  const auto& spec = env.spec();
  const ParamLayout& layout = model.layout();
  require_dim(theta0.size(), layout.size(), "initial parameter vector");
  const auto pd = model.pd_blocks();
  const double gamma = spec.gamma;
  constexpr long kMaxConsecutiveFailures = 50;

  History h;
  Vector theta = enforce_pd(layout, pd, theta0, cfg.pd_eps);
  h.thetas.push_back(theta);

  Vector s = options.initial_state.value_or(env.default_initial_state());
  std::vector<env::Transition> window;
  std::vector<std::optional<double>> targets;
  std::deque<double> recent;
  double recent_sum = 0.0;
  long consecutive_failures = 0;
  // Without a greedy action the step is purely exploratory.
  LearnerConfig fallback = cfg;
  fallback.epsilon = 1.0;

  auto greedy = [&](const Vector& state, const solver::MpcSolution* warm) -> std::optional<approx::Evaluation> {
    try {
      return model.v(theta, state, false, warm);
    } catch (const solver::SolverFailure&) {
      ++h.solver_failures;
      return std::nullopt;
    }
  };
  std::optional<approx::Evaluation> v_cur = greedy(s, nullptr);

  for (long t = 0; t < options.steps; ++t) {
    if (options.reset_every > 0 && t > 0 && t % options.reset_every == 0) {
      s = env.sample_initial_state(rng);
      v_cur = greedy(s, v_cur ? &v_cur->solution : nullptr);
    }
    Vector a_greedy;
    if (v_cur) {
      a_greedy = v_cur->action.cwiseMax(spec.u_lo).cwiseMin(spec.u_hi);
    } else {
      a_greedy = Vector::Zero(spec.n_a).cwiseMax(spec.u_lo).cwiseMin(spec.u_hi);
    }
    const Vector a = explore(a_greedy, v_cur ? cfg : fallback, rng, spec.u_lo, spec.u_hi);
    env::Transition tr;
    try {
      tr = env.step(s, a, rng);
    } catch (const DivergenceError& e) {
      h.aborted = true;
      h.abort_reason = e.what();
      break;
    }
    if (options.record_trajectory) h.trajectory.push_back(tr);

    std::optional<approx::Evaluation> v_next = greedy(tr.s_next, v_cur ? &v_cur->solution : nullptr);
    std::optional<double> q_sa;
    if (v_cur && a == a_greedy && v_cur->action == a_greedy) {
      q_sa = v_cur->value;
    } else {
      try {
        q_sa = model.q(theta, s, a, false, v_cur ? &v_cur->solution : nullptr).value;
      } catch (const solver::SolverFailure&) {
        ++h.solver_failures;
      }
    }

    window.push_back(tr);
    if (v_next) {
      targets.emplace_back(tr.cost + gamma * v_next->value);
    } else {
      targets.emplace_back(std::nullopt);
    }
    if (v_next && q_sa) {
      consecutive_failures = 0;
      const double delta = *targets.back() - *q_sa;
      h.steps.push_back(t);
      h.deltas.push_back(delta);
      recent.push_back(std::abs(delta));
      recent_sum += std::abs(delta);
      if (recent.size() > kRollingWindow) {
        recent_sum -= recent.front();
        recent.pop_front();
      }
      h.rolling.push_back(recent_sum / static_cast<double>(recent.size()));
    } else if (++consecutive_failures >= kMaxConsecutiveFailures) {
      h.aborted = true;
      h.abort_reason = "repeated MPC solver failures";
      break;
    }

    if (static_cast<long>(window.size()) >= cfg.n_upd) {
      const BatchFitResult fit = batch_fit_targets(model, window, targets, theta, cfg);
      if (fit.status != FitStatus::aborted) {
        theta = enforce_pd(layout, pd, mix(theta, fit.theta, cfg.alpha), cfg.pd_eps);
      }
      h.updates.push_back({t + 1, fit.status, fit.iterations, fit.initial_cost, fit.final_cost, fit.dropped,
                           min_pd_eigenvalue(layout, pd, theta)});
      h.thetas.push_back(theta);
      if (options.progress) {
        const UpdateRecord& u = h.updates.back();
        *options.progress << "update " << h.updates.size() << " at step " << u.step << ": " << to_string(u.status)
                          << ", " << u.iterations << " iterations, cost " << u.initial_cost << " -> "
                          << u.final_cost << ", rolling |delta| " << h.rolling.back() << std::endl;
      }
      window.clear();
      targets.clear();
      v_next = greedy(tr.s_next, v_next ? &v_next->solution : nullptr);
    }
    s = tr.s_next;
    v_cur = std::move(v_next);
  }
  return h;
}

void write_td_csv(std::ostream& out, const History& history) {
  out << "step,delta,rolling_mean\n";
  for (std::size_t i = 0; i < history.deltas.size(); ++i) {
    out << history.steps[i] << ',' << csv::number(history.deltas[i]) << ',' << csv::number(history.rolling[i])
        << '\n';
  }
}

void write_theta_csv(std::ostream& out, const ParamLayout& layout, const History& history) {
  out << "update_index";
  for (const auto& name : layout.flat_names()) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < history.thetas.size(); ++i) {
    out << i;
    for (Index j = 0; j < history.thetas[i].size(); ++j) out << ',' << csv::number(history.thetas[i](j));
    out << '\n';
  }
}

ClosedLoopStats evaluate_policy(const env::Environment& env, const approx::ActionValueModel& model, const Vector& theta,
                                int episodes, long steps_per_episode, std::uint64_t seed,
                                std::vector<env::Transition>* trajectory) {
  const auto& spec = env.spec();
  ClosedLoopStats stats;
  stats.lower_violation_fraction = Vector::Zero(spec.n_s);
  double total = 0.0;
  long violations = 0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(seed + static_cast<std::uint64_t>(e));
    Vector s = env.default_initial_state();
    Vector a_prev = Vector::Zero(spec.n_a).cwiseMax(spec.u_lo).cwiseMin(spec.u_hi);
    std::optional<solver::MpcSolution> warm;
    for (long t = 0; t < steps_per_episode; ++t) {
      Vector a = a_prev;
      try {
        approx::Evaluation v = model.v(theta, s, false, warm ? &*warm : nullptr);
        a = v.action.cwiseMax(spec.u_lo).cwiseMin(spec.u_hi);
        warm = std::move(v.solution);
      } catch (const solver::SolverFailure&) {
        ++stats.solver_failures;
        warm.reset();
      }
      const env::Transition tr = env.step(s, a, rng);
      if (trajectory != nullptr) trajectory->push_back(tr);
      total += tr.cost;
      bool violated = false;
      if (spec.x_lo) {
        for (Index i = 0; i < spec.n_s; ++i) {
          const double below = (*spec.x_lo)(i) - s(i);
          const double above = s(i) - (*spec.x_hi)(i);
          if (below > 0.0) stats.lower_violation_fraction(i) += 1.0;
          if (below > 0.0 || above > 0.0) violated = true;
          stats.max_violation = std::max({stats.max_violation, below, above});
        }
      }
      if (violated) ++violations;
      ++stats.steps;
      s = tr.s_next;
      a_prev = a;
    }
  }
  if (stats.steps > 0) {
    stats.average_cost = total / static_cast<double>(stats.steps);
    stats.violation_fraction = static_cast<double>(violations) / static_cast<double>(stats.steps);
    stats.lower_violation_fraction /= static_cast<double>(stats.steps);
  }
  return stats;
}

}  // namespace mpcrl::learn
