#include "cli/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mpcrl/csv.hpp"
#include "mpcrl/evaporation.hpp"
#include "mpcrl/lqr.hpp"
#include "mpcrl/ocp.hpp"

namespace mpcrl::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalSeedOffset = 1000003;

std::uint64_t eval_seed(const ExperimentConfig& cfg) { return cfg.seed + kEvalSeedOffset; }

std::shared_ptr<const env::LtiEnv> make_lti(const EnvSection& e) {
  env::LtiOptions opt;
  opt.u_lo = e.u_lo;
  opt.u_hi = e.u_hi;
  return env::make_lti_env(e.A, e.B, e.T, e.S, e.R, e.gamma, e.noise_sigma, opt);
}

// M = I, m = 0, c = 0 and one row per finite input bound.
ocp::ThetaCondensed identity_condensed(Index nx, Index nu, Index N, const Vector& u_lo, const Vector& u_hi) {
  ocp::ThetaCondensed t;
  t.nx = nx;
  t.nu = nu;
  t.N = N;
  t.M = Matrix::Identity(t.nz(), t.nz());
  t.m = Vector::Zero(t.nz());
  std::vector<std::pair<Vector, double>> rows;
  for (Index k = 0; k < N; ++k) {
    for (Index i = 0; i < nu; ++i) {
      const Index col = nx + k * nu + i;
      if (std::isfinite(u_hi(i))) {
        Vector r = Vector::Zero(t.nz());
        r(col) = 1.0;
        rows.emplace_back(r, u_hi(i));
      }
      if (std::isfinite(u_lo(i))) {
        Vector r = Vector::Zero(t.nz());
        r(col) = -1.0;
        rows.emplace_back(r, -u_lo(i));
      }
    }
  }
  t.C = Matrix::Zero(static_cast<Index>(rows.size()), t.nz());
  t.d = Vector::Zero(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.C.row(static_cast<Index>(r)) = rows[r].first.transpose();
    t.d(static_cast<Index>(r)) = rows[r].second;
  }
  return t;
}

solver::SolverSettings solver_settings(const MpcSection& mpc) {
  solver::SolverSettings s;
  s.max_iter = mpc.solver_max_iter;
  return s;
}

ocp::MpcConfig mpc_config(const ExperimentConfig& cfg, std::shared_ptr<const Dynamics> model,
                          const env::EnvSpec& spec) {
  auto mc = ocp::MpcConfig::defaults(std::move(model), cfg.mpc.N, spec.gamma);
  if (cfg.mpc.W_s) mc.W_s = *cfg.mpc.W_s;
  if (cfg.mpc.w_s) mc.w_s = *cfg.mpc.w_s;
  mc.u_lo = spec.u_lo;
  mc.u_hi = spec.u_hi;
  mc.constraints = spec.x_lo ? cfg.mpc.state_constraints : ocp::StateConstraints::none;
  return mc;
}

double mean_abs(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += std::abs(v[i]);
  return sum / static_cast<double>(end - begin);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

fs::path prepare_output(const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ConfigError("run.output: cannot create directory '" + dir + "'");
  return out;
}

class Summary {
 public:
  void add(const std::string& key, const std::string& value) { out_ << key << ": " << value << '\n'; }
  void add(const std::string& key, double value) { add(key, csv::number(value)); }
  void add(const std::string& key, long value) { add(key, std::to_string(value)); }
  void add_vector(const std::string& key, const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) add(key + "_" + std::to_string(i), v(i));
  }
  void write(const fs::path& path) const {
    auto f = open_output(path);
    f << out_.str();
  }

 private:
  std::ostringstream out_;
};

void add_stats(Summary& sum, const std::string& prefix, const learn::ClosedLoopStats& st) {
  sum.add(prefix + "_average_cost", st.average_cost);
  sum.add(prefix + "_violation_fraction", st.violation_fraction);
  sum.add_vector(prefix + "_lower_violation_fraction", st.lower_violation_fraction);
  sum.add(prefix + "_max_violation", st.max_violation);
  sum.add(prefix + "_solver_failures", st.solver_failures);
}

double relative_gain(double reference, double value) {
  if (reference == value) return 0.0;
  return 100.0 * (reference - value) / std::abs(reference);
}

struct Check {
  std::string name;
  double value;
  double threshold;
};

// Central differences of Q against the parameter gradient at random points.
double gradient_check(const approx::ActionValueModel& model, const Vector& theta, const env::EnvSpec& spec,
                      Rng& rng, int points) {
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    Vector s(spec.n_s);
    Vector a(spec.n_a);
    for (Index i = 0; i < s.size(); ++i) s(i) = rng.normal();
    for (Index i = 0; i < a.size(); ++i) a(i) = std::clamp(rng.normal(), spec.u_lo(i), spec.u_hi(i));
    const Vector g = model.q(theta, s, a, true).grad;
    for (Index j = 0; j < theta.size(); ++j) {
      if (!std::isfinite(theta(j))) continue;
      const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
      Vector tp = theta;
      Vector tm = theta;
      tp(j) += h;
      tm(j) -= h;
      const double fd = (model.q(tp, s, a, false).value - model.q(tm, s, a, false).value) / (2.0 * h);
      worst = std::max(worst, std::abs(g(j) - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

double scaling_check(const env::LtiEnv& e, const Matrix& P, Rng& rng, int points) {
  const lqr::LqrTheta theta{e.A(), e.B(), P};
  const lqr::LqrTheta scaled = lqr::scaled_equivalent(theta);
  const lqr::LqrCost cost{e.T(), e.S(), e.R(), e.spec().gamma};
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    Vector s(e.spec().n_s);
    Vector a(e.spec().n_a);
    for (Index i = 0; i < s.size(); ++i) s(i) = rng.normal();
    for (Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
    const double q = lqr::q1_exact(theta, cost, s, a);
    worst = std::max(worst, std::abs(lqr::q1_exact(scaled, cost, s, a) - q) / (1.0 + std::abs(q)));
  }
  return worst;
}

}  // namespace

Setup build_setup(const ExperimentConfig& cfg) {
  Setup out;
  if (cfg.env.type == "evaporation") {
    auto e = env::make_evaporation_like_env(cfg.env.evaporation);
    auto mc = mpc_config(cfg, e->nominal_model(), e->spec());
    if (cfg.mpc.cost_center == "nominal") {
      const Vector x = e->default_initial_state();
      mc.cost_center = Vector(x.size() + e->spec().n_a);
      mc.cost_center << x, e->steady_input(x);
    }
    out.model = std::make_unique<approx::NonCondensedMpc>(mc, solver_settings(cfg.mpc));
    out.theta_naive = ocp::ThetaNonCondensed::naive(*e->spec().x_lo, *e->spec().x_hi, e->spec().n_a).flatten();
    out.environment = e;
  } else {
    auto e = make_lti(cfg.env);
    const auto& spec = e->spec();
    if (cfg.mpc.parametrization == "condensed") {
      const auto t = identity_condensed(spec.n_s, spec.n_a, cfg.mpc.N, spec.u_lo, spec.u_hi);
      out.model = std::make_unique<approx::CondensedMpc>(spec.n_s, spec.n_a, cfg.mpc.N, t.rows(),
                                                          solver_settings(cfg.mpc));
      out.theta_naive = t.flatten();
    } else {
      const Matrix A = cfg.mpc.A_hat.value_or(e->A());
      const Matrix B = cfg.mpc.B_hat.value_or(e->B());
      const auto mc = mpc_config(cfg, std::make_shared<LinearModel>(A, B), spec);
      out.model = std::make_unique<approx::NonCondensedMpc>(mc, solver_settings(cfg.mpc));
      const double inf = std::numeric_limits<double>::infinity();
      out.theta_naive = ocp::ThetaNonCondensed::naive(Vector::Constant(spec.n_s, -inf),
                                                      Vector::Constant(spec.n_s, inf), spec.n_a)
                            .flatten();
    }
    out.environment = e;
  }
  out.theta0 = learn::enforce_pd(out.model->layout(), out.model->pd_blocks(), out.theta_naive, cfg.learner.pd_eps);
  return out;
}

double initial_rolling(const learn::History& h) {
  return mean_abs(h.deltas, 0, std::min(h.deltas.size(), learn::kRollingWindow));
}

double final_rolling(const learn::History& h) {
  const std::size_t n = h.deltas.size();
  return mean_abs(h.deltas, n - std::min(n, learn::kRollingWindow), n);
}

Matrix greedy_gain(const approx::ActionValueModel& model, const Vector& theta) {
  const Index nx = model.state_dim();
  const Vector a0 = model.v(theta, Vector::Zero(nx), false).action;
  Matrix K(model.action_dim(), nx);
  for (Index i = 0; i < nx; ++i) {
    K.col(i) = a0 - model.v(theta, Vector::Unit(nx, i), false).action;
  }
  return K;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  RunReport report;
  report.output = prepare_output(cfg.run.output);
  const Setup setup = build_setup(cfg);
  const auto& environment = *setup.environment;
  const auto& model = *setup.model;

  Summary sum;
  sum.add("experiment", cfg.experiment);
  sum.add("seed", std::to_string(cfg.seed));
  sum.add("parametrization", cfg.mpc.parametrization);
  sum.add("horizon", static_cast<long>(cfg.mpc.N));
  sum.add("parameters", static_cast<long>(model.layout().size()));

  std::vector<Check> checks;
  if (cfg.experiment == "lqr-validation" || cfg.experiment == "lqr-learning" || cfg.experiment == "wrong-model") {
    if (cfg.env.type != "lti") throw ConfigError("env.type: experiment '" + cfg.experiment + "' requires lti");
  }
  if (cfg.experiment == "lqr-validation") {
    const auto& e = static_cast<const env::LtiEnv&>(environment);
    const lqr::LqrCost cost{e.T(), e.S(), e.R(), e.spec().gamma};
    const Matrix P = lqr::solve_riccati(e.A(), e.B(), cost);
    Rng check_rng(cfg.seed);
    checks.push_back({"riccati_residual", lqr::riccati_residual(P, e.A(), e.B(), cost), 1e-10});
    checks.push_back({"gradient_check_max_relative_error",
                      gradient_check(model, setup.theta0, e.spec(), check_rng, 5), 1e-5});
    checks.push_back({"scaling_test_max_deviation", scaling_check(e, P, check_rng, 100), 1e-9});
  }

  learn::TrainOptions options;
  options.steps = cfg.run.steps;
  options.initial_state = cfg.env.initial_state;
  options.reset_every = cfg.run.reset_every;
  options.record_trajectory = true;
  if (cfg.run.progress) options.progress = &std::cerr;
  Rng rng(cfg.seed);

  learn::History history;
  try {
    history = learn::train(environment, model, setup.theta0, cfg.learner, options, rng);
  } catch (const Error& err) {
    history.aborted = true;
    history.abort_reason = err.what();
    if (history.thetas.empty()) history.thetas.push_back(setup.theta0);
  }
  report.aborted = history.aborted;
  report.abort_reason = history.abort_reason;
  report.initial_td = initial_rolling(history);
  report.final_td = final_rolling(history);

  {
    auto f = open_output(report.output / "td.csv");
    learn::write_td_csv(f, history);
  }
  {
    auto f = open_output(report.output / "theta.csv");
    learn::write_theta_csv(f, model.layout(), history);
  }
  {
    auto f = open_output(report.output / "updates.csv");
    f << "step,status,iterations,initial_cost,final_cost,dropped,min_pd_eig\n";
    for (const auto& u : history.updates) {
      f << u.step << ',' << learn::to_string(u.status) << ',' << u.iterations << ',' << csv::number(u.initial_cost)
        << ',' << csv::number(u.final_cost) << ',' << u.dropped << ',' << csv::number(u.min_pd_eig) << '\n';
    }
  }
  {
    auto f = open_output(report.output / "trajectory.csv");
    env::write_trajectory_csv(f, history.trajectory);
  }

  sum.add("status", history.aborted ? "FAILED (" + history.abort_reason + ")" : std::string("completed"));
  sum.add("steps", static_cast<long>(history.deltas.size()));
  sum.add("updates", static_cast<long>(history.updates.size()));
  sum.add("solver_failures", history.solver_failures);
  sum.add("initial_rolling_td", report.initial_td);
  sum.add("final_rolling_td", report.final_td);
  sum.add("td_ratio", report.initial_td > 0.0 ? report.final_td / report.initial_td : 0.0);
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& u : history.updates) min_eig = std::min(min_eig, u.min_pd_eig);
  if (!history.updates.empty()) sum.add("min_pd_eigenvalue_after_updates", min_eig);

  const Vector& learned = history.thetas.back();
  if (!history.aborted) {
    if (cfg.env.type == "lti") {
      const auto& e = static_cast<const env::LtiEnv&>(environment);
      const lqr::LqrCost cost{e.T(), e.S(), e.R(), e.spec().gamma};
      const Matrix P = lqr::solve_riccati(e.A(), e.B(), cost);
      const Matrix K_star = lqr::gain_from({e.A(), e.B(), P}, cost);
      try {
        const Matrix K = greedy_gain(model, learned);
        const Matrix K0 = greedy_gain(model, setup.theta0);
        sum.add("initial_gain_error", (K0 - K_star).operatorNorm());
        sum.add("learned_gain_error", (K - K_star).operatorNorm());
      } catch (const Error& err) {
        sum.add("learned_gain_error", std::string("unavailable (") + err.what() + ")");
      }
    }
    sum.add("eval_episodes", static_cast<long>(cfg.run.eval_episodes));
    sum.add("eval_steps", cfg.run.eval_steps);
    sum.add("eval_seed", std::to_string(eval_seed(cfg)));
    report.baseline =
        learn::evaluate_policy(environment, model, setup.theta0, cfg.run.eval_episodes, cfg.run.eval_steps,
                               eval_seed(cfg));
    report.learned = learn::evaluate_policy(environment, model, learned, cfg.run.eval_episodes, cfg.run.eval_steps,
                                            eval_seed(cfg));
    add_stats(sum, "baseline", report.baseline);
    add_stats(sum, "learned", report.learned);
    sum.add("relative_gain_percent", relative_gain(report.baseline.average_cost, report.learned.average_cost));
  }
  for (const auto& c : checks) {
    sum.add(c.name, c.value);
    sum.add(c.name + "_threshold", c.threshold);
    sum.add(c.name + "_ok", c.value <= c.threshold ? "yes" : "no");
  }
  sum.write(report.output / "summary.txt");
  if (history.aborted) throw RunAborted("training aborted: " + history.abort_reason);
  return report;
}

std::vector<Vector> read_theta_csv(const fs::path& path, const ParamLayout& layout) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string() + " (run the experiment first)");
  std::string line;
  std::getline(in, line);
  std::string expected = "update_index";
  for (const auto& n : layout.flat_names()) expected += "," + n;
  if (line != expected) throw ConfigError(path.string() + ": header does not match the configured parameters");
  std::vector<Vector> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    Vector v(layout.size());
    for (Index i = 0; i < v.size(); ++i) {
      if (!std::getline(ss, cell, ',')) throw ConfigError(path.string() + ": short row");
      v(i) = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw ConfigError(path.string() + ": no parameter rows");
  return rows;
}

std::vector<ComparisonRow> compare_controllers(const ExperimentConfig& cfg, const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("--controllers: at least one controller is required");
  const Setup setup = build_setup(cfg);
  const fs::path out = prepare_output(cfg.run.output);
  std::vector<Vector> snapshots;
  auto load = [&]() -> const std::vector<Vector>& {
    if (snapshots.empty()) snapshots = read_theta_csv(out / "theta.csv", setup.model->layout());
    return snapshots;
  };

  std::vector<ComparisonRow> rows;
  for (const auto& name : names) {
    Vector theta;
    if (name == "naive") {
      theta = setup.theta_naive;
    } else if (name == "initial") {
      theta = setup.theta0;
    } else if (name == "learned") {
      theta = load().back();
    } else if (name.rfind("update:", 0) == 0) {
      const std::string idx = name.substr(7);
      char* end = nullptr;
      const long k = std::strtol(idx.c_str(), &end, 10);
      if (idx.empty() || *end != '\0' || k < 0 || static_cast<std::size_t>(k) >= load().size()) {
        throw ConfigError("--controllers: no snapshot '" + name + "' in theta.csv");
      }
      theta = load()[static_cast<std::size_t>(k)];
    } else {
      throw ConfigError("--controllers: unknown controller '" + name +
                        "' (expected naive, initial, learned or update:K)");
    }
    ComparisonRow row;
    row.controller = name;
    row.stats = learn::evaluate_policy(*setup.environment, *setup.model, theta, cfg.run.eval_episodes,
                                       cfg.run.eval_steps, eval_seed(cfg));
    rows.push_back(std::move(row));
  }
  for (auto& r : rows) r.relative_gain_percent = relative_gain(rows.front().stats.average_cost, r.stats.average_cost);

  auto f = open_output(out / "comparison.csv");
  const Index ns = setup.environment->spec().n_s;
  f << "controller,average_cost,violation_fraction";
  for (Index i = 0; i < ns; ++i) f << ",lower_violation_fraction_" << i;
  f << ",max_violation,solver_failures,relative_gain_percent\n";
  for (const auto& r : rows) {
    f << r.controller << ',' << csv::number(r.stats.average_cost) << ',' << csv::number(r.stats.violation_fraction);
    for (Index i = 0; i < ns; ++i) f << ',' << csv::number(r.stats.lower_violation_fraction(i));
    f << ',' << csv::number(r.stats.max_violation) << ',' << r.stats.solver_failures << ','
      << csv::number(r.relative_gain_percent) << '\n';
  }
  return rows;
}

}  // namespace mpcrl::cli
