#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mpcrl/learner.hpp"

namespace mpcrl::learn {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Q(s, a) = theta' (s, a, 1) with two candidate actions for V.
approx::LinearFeatures affine_model() {
  return approx::LinearFeatures(
      1, 1, 3, [](const Vector& s, const Vector& a) { return vec({s(0), a(0), 1.0}); },
      {vec({-1.0}), vec({1.0})});
}

ParamLayout sym_layout() {
  ParamLayout l;
  l.add("H", 2, 2, true).add("h", 2);
  return l;
}

TEST(TdError, MatchesHandComputation) {
  const auto model = affine_model();
  const Vector theta = vec({0.5, 2.0, 0.1});
  const Vector tilde = vec({1.0, 1.0, 0.0});
  const env::Transition tr{vec({1.0}), vec({0.5}), 3.0, vec({2.0})};
  // V_tilde(2) = min(2 - 1, 2 + 1) = 1; Q(1, 0.5) = 0.5 + 1 + 0.1.
  EXPECT_NEAR(td_error(tr, theta, tilde, model, 0.9), 3.0 + 0.9 * 1.0 - 1.6, 1e-15);
}

TEST(StandardUpdate, StepAndSymmetry) {
  const ParamLayout l = sym_layout();
  const Vector theta = Vector::Zero(6);
  const Vector g = vec({1.0, 2.0, 0.0, 1.0, 3.0, -1.0});
  const Vector out = standard_update(l, theta, 0.5, g, 0.1);
  const Matrix H = l.get(out, "H");
  EXPECT_DOUBLE_EQ(H(0, 1), H(1, 0));
  EXPECT_DOUBLE_EQ(H(1, 0), 0.05);
  EXPECT_DOUBLE_EQ(out(4), 0.15);
  EXPECT_DOUBLE_EQ(out(5), -0.05);
}

TEST(EnforcePd, LeavesFeasibleBlocksBitIdentical) {
  const ParamLayout l = sym_layout();
  Vector theta = vec({2.0, 0.3, 0.3, 1.0, 5.0, 6.0});
  const Vector out = enforce_pd(l, {{"H", 0, 2}}, theta, 1e-6);
  EXPECT_EQ(out, theta);
}

TEST(EnforcePd, ClipsEigenvaluesAtTheFloor) {
  const ParamLayout l = sym_layout();
  // eigenvalues of [[1, 2], [2, 1]] are 3 and -1.
  const Vector theta = vec({1.0, 2.0, 2.0, 1.0, 5.0, 6.0});
  const Vector out = enforce_pd(l, {{"H", 0, 2}}, theta, 1e-6);
  const Matrix H = l.get(out, "H");
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  EXPECT_NEAR(es.eigenvalues()(0), 1e-6, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(1), 3.0, 1e-12);
  EXPECT_EQ(out.tail(2), theta.tail(2));
  EXPECT_NEAR(min_pd_eigenvalue(l, {{"H", 0, 2}}, out), 1e-6, 1e-12);
}

TEST(EnforcePd, SubBlockOnly) {
  ParamLayout l;
  l.add("M", 3, 3, true);
  Matrix M = Matrix::Identity(3, 3);
  M(0, 0) = -5.0;  // outside the constrained block
  M(2, 2) = -1.0;
  Vector theta(9);
  l.set(theta, "M", M);
  const Matrix out = l.get(enforce_pd(l, {{"M", 1, 2}}, theta, 0.5), "M");
  EXPECT_EQ(out(0, 0), -5.0);
  EXPECT_NEAR(out(2, 2), 0.5, 1e-15);
  EXPECT_NEAR(out(1, 1), 1.0, 1e-15);
}

TEST(Mix, ConvexCombination) {
  const Vector out = mix(vec({0.0, 10.0, -INFINITY}), vec({1.0, 0.0, -INFINITY}), 0.25);
  EXPECT_DOUBLE_EQ(out(0), 0.25);
  EXPECT_DOUBLE_EQ(out(1), 7.5);
  EXPECT_EQ(out(2), -INFINITY);
  EXPECT_EQ(mix(vec({1.0, 2.0}), vec({3.0, 4.0}), 1.0), vec({3.0, 4.0}));
}

TEST(Explore, GreedyWhenEpsilonIsZero) {
  LearnerConfig cfg;
  cfg.epsilon = 0.0;
  Rng rng(1);
  EXPECT_EQ(explore(vec({0.3}), cfg, rng, vec({-1.0}), vec({1.0})), vec({0.3}));
}

TEST(Explore, FrequencyAndSaturation) {
  LearnerConfig cfg;
  cfg.epsilon = 0.1;
  cfg.explore_sigma = std::sqrt(10.0);
  Rng rng(2);
  const int n = 20000;
  int explored = 0;
  int saturated = 0;
  for (int i = 0; i < n; ++i) {
    const Vector a = explore(vec({0.3}), cfg, rng, vec({-1.0}), vec({1.0}));
    EXPECT_GE(a(0), -1.0);
    EXPECT_LE(a(0), 1.0);
    if (a(0) != 0.3) ++explored;
    if (std::abs(a(0)) == 1.0) ++saturated;
  }
  EXPECT_NEAR(static_cast<double>(explored) / n, 0.1, 0.01);
  // P(|N(0, 10)| > 1) = 0.7518
  EXPECT_NEAR(static_cast<double>(saturated) / explored, 0.7518, 0.03);
}

TEST(Explore, GreedyCentre) {
  LearnerConfig cfg;
  cfg.epsilon = 1.0;
  cfg.explore_sigma = 0.0;
  cfg.explore_center = ExploreCenter::greedy;
  Rng rng(3);
  EXPECT_EQ(explore(vec({150.0}), cfg, rng, vec({100.0}), vec({400.0})), vec({150.0}));
}

TEST(GaussNewton, MinimumNormSolution) {
  Matrix J(1, 3);
  J << 1.0, 2.0, 2.0;
  const Vector d = gauss_newton_step(J, vec({9.0}));
  // pseudo-inverse: J' (J J')^-1 r
  EXPECT_LE((d - J.transpose() * (9.0 / 9.0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GaussNewton, DampingShortensTheStep) {
  Matrix J(2, 2);
  J << 1.0, 0.0, 0.0, 1e-3;
  const Vector r = vec({1.0, 1.0});
  const Vector full = gauss_newton_step(J, r);
  const Vector damped = gauss_newton_step(J, r, 1.0);
  EXPECT_NEAR(full(1), 1e3, 1e-9);
  // Marquardt scaling halves every component at mu = 1.
  EXPECT_NEAR(damped(0), 0.5, 1e-12);
  EXPECT_NEAR(damped(1), 500.0, 1e-9);
}

TEST(GaussNewton, SingleStepRecoversTheStandardUpdate) {
  // One transition, Q linear in theta with a unit-norm feature vector.
  const Vector phi = vec({0.6, 0.8});
  const approx::LinearFeatures model(1, 1, 2, [&](const Vector&, const Vector&) { return phi; });
  const Vector theta = vec({0.3, -0.2});
  const double target = 2.5;
  const env::Transition tr{vec({0.0}), vec({0.0}), target, vec({0.0})};
  const double delta = target - theta.dot(phi);
  const double alpha = 0.01;

  LearnerConfig cfg;
  cfg.alpha = alpha;
  cfg.gn_max_iter = 1;
  const BatchFitResult fit = batch_fit_targets(model, {tr}, {target}, theta, cfg);
  ASSERT_NE(fit.status, FitStatus::aborted);
  const Vector via_fit = mix(theta, fit.theta, alpha);
  const Vector eq2b = standard_update(model.layout(), theta, delta, phi, alpha);
  EXPECT_LE((via_fit - eq2b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchFit, LinearLeastSquaresOptimum) {
  const auto model = affine_model();
  Rng rng(4);
  std::vector<env::Transition> batch;
  std::vector<std::optional<double>> targets;
  Matrix Phi(30, 3);
  Vector y(30);
  for (int i = 0; i < 30; ++i) {
    const Vector s = vec({rng.normal()});
    const Vector a = vec({rng.normal()});
    batch.push_back({s, a, 0.0, s});
    y(i) = 1.0 + 2.0 * s(0) - a(0) + 0.1 * rng.normal();
    targets.emplace_back(y(i));
    Phi.row(i) << s(0), a(0), 1.0;
  }
  LearnerConfig cfg;
  const BatchFitResult fit = batch_fit_targets(model, batch, targets, Vector::Zero(3), cfg);
  EXPECT_EQ(fit.status, FitStatus::converged);
  const Vector ls = Phi.colPivHouseholderQr().solve(y);
  EXPECT_LE((fit.theta - ls).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(fit.final_cost, fit.initial_cost);
  for (std::size_t k = 1; k < fit.cost_history.size(); ++k) {
    EXPECT_LE(fit.cost_history[k], fit.cost_history[k - 1]);
  }
}

TEST(BatchFit, FrozenBlocksStayPut) {
  const approx::LinearFeatures model(1, 1, 3, [](const Vector& s, const Vector& a) { return vec({s(0), a(0), 1.0}); });
  LearnerConfig cfg;
  cfg.frozen = {"theta"};
  const env::Transition tr{vec({1.0}), vec({1.0}), 0.0, vec({0.0})};
  const BatchFitResult fit = batch_fit_targets(model, {tr}, {5.0}, vec({0.1, 0.2, 0.3}), cfg);
  EXPECT_EQ(fit.theta, vec({0.1, 0.2, 0.3}));
}

TEST(BatchFit, MissingTargetsAreDropped) {
  const auto model = affine_model();
  LearnerConfig cfg;
  cfg.max_failure_fraction = 0.5;
  const std::vector<env::Transition> batch{{vec({1.0}), vec({0.0}), 0.0, vec({0.0})},
                                           {vec({0.0}), vec({1.0}), 0.0, vec({0.0})}};
  const BatchFitResult fit = batch_fit_targets(model, batch, {1.0, std::nullopt}, Vector::Zero(3), cfg);
  EXPECT_EQ(fit.dropped, 1);
  cfg.max_failure_fraction = 0.1;
  EXPECT_EQ(batch_fit_targets(model, batch, {1.0, std::nullopt}, Vector::Zero(3), cfg).status, FitStatus::aborted);
}

std::shared_ptr<env::LtiEnv> scalar_env() {
  env::LtiOptions opt;
  opt.u_lo = vec({-1.0});
  opt.u_hi = vec({1.0});
  return env::make_lti_env(Matrix::Constant(1, 1, 0.8), Matrix::Constant(1, 1, 0.5), Matrix::Identity(1, 1),
                           Matrix::Zero(1, 1), Matrix::Identity(1, 1), 0.9, 0.1, opt);
}

approx::CondensedMpc scalar_condensed() {
  return approx::CondensedMpc(1, 1, 1, 2);
}

Vector scalar_theta0() {
  ocp::ThetaCondensed t;
  t.nx = 1;
  t.nu = 1;
  t.N = 1;
  t.M = Matrix::Identity(2, 2);
  t.m = Vector::Zero(2);
  t.C = Matrix(2, 2);
  t.C << 0, 1, 0, -1;
  t.d = vec({1.0, 1.0});
  return t.flatten();
}

TEST(Train, SameSeedSameHistory) {
  const auto e = scalar_env();
  const auto model = scalar_condensed();
  LearnerConfig cfg;
  cfg.n_upd = 50;
  cfg.epsilon = 0.5;
  TrainOptions opt;
  opt.steps = 200;
  Rng r1(5);
  Rng r2(5);
  const History h1 = train(*e, model, scalar_theta0(), cfg, opt, r1);
  const History h2 = train(*e, model, scalar_theta0(), cfg, opt, r2);
  ASSERT_EQ(h1.deltas.size(), 200u);
  EXPECT_EQ(h1.deltas, h2.deltas);
  EXPECT_EQ(h1.thetas.size(), 5u);
  EXPECT_EQ(h1.thetas.back(), h2.thetas.back());
  for (const auto& u : h1.updates) EXPECT_GE(u.min_pd_eig, cfg.pd_eps);

  std::ostringstream a;
  std::ostringstream b;
  write_td_csv(a, h1);
  write_td_csv(b, h2);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 24), "step,delta,rolling_mean\n");
}

TEST(Train, RollingMeanOfAbsoluteDelta) {
  const auto e = scalar_env();
  const auto model = scalar_condensed();
  LearnerConfig cfg;
  cfg.n_upd = 10000;
  TrainOptions opt;
  opt.steps = 1200;
  Rng rng(6);
  const History h = train(*e, model, scalar_theta0(), cfg, opt, rng);
  ASSERT_EQ(h.rolling.size(), 1200u);
  double sum = 0.0;
  for (std::size_t i = 200; i < 1200; ++i) sum += std::abs(h.deltas[i]);
  EXPECT_NEAR(h.rolling.back(), sum / 1000.0, 1e-12);
  EXPECT_NEAR(h.rolling[0], std::abs(h.deltas[0]), 1e-15);
}

TEST(Evaluate, CommonRandomNumbers) {
  const auto e = scalar_env();
  const auto model = scalar_condensed();
  const ClosedLoopStats a = evaluate_policy(*e, model, scalar_theta0(), 3, 50, 17);
  const ClosedLoopStats b = evaluate_policy(*e, model, scalar_theta0(), 3, 50, 17);
  EXPECT_EQ(a.average_cost, b.average_cost);
  EXPECT_EQ(a.steps, 150);
  EXPECT_EQ(a.solver_failures, 0);
}

TEST(LearnerConfig, Validation) {
  LearnerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epsilon = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace mpcrl::learn
