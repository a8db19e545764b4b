#include "mpcrl/env.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "mpcrl/csv.hpp"

namespace mpcrl {

LinearModel::LinearModel(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
  require_dim(A_.cols(), A_.rows(), "LinearModel A");
  require_dim(B_.rows(), A_.rows(), "LinearModel B");
}

Matrix LinearModel::jacobian(const Vector& /*x*/, const Vector& /*u*/) const {
  Matrix J(A_.rows(), A_.cols() + B_.cols());
  J << A_, B_;
  return J;
}

Matrix LinearModel::weighted_hessian(const Vector& /*x*/, const Vector& /*u*/, const Vector& /*lambda*/) const {
  const Index n = A_.cols() + B_.cols();
  return Matrix::Zero(n, n);
}

}  // namespace mpcrl

namespace mpcrl::env {

void EnvSpec::validate() const {
  if (n_s <= 0 || n_a <= 0) throw ConfigError("environment dimensions must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (u_lo.size() != n_a || u_hi.size() != n_a) throw ConfigError("action bounds must have n_a entries");
  for (Index i = 0; i < n_a; ++i) {
    if (!(u_lo(i) < u_hi(i))) throw ConfigError("action bounds inverted at component " + std::to_string(i));
  }
  if (x_lo.has_value() != x_hi.has_value()) throw ConfigError("state bounds need both x_lo and x_hi");
  if (x_lo) {
    if (x_lo->size() != n_s || x_hi->size() != n_s) throw ConfigError("state bounds must have n_s entries");
    for (Index i = 0; i < n_s; ++i) {
      if (!((*x_lo)(i) < (*x_hi)(i))) throw ConfigError("state bounds inverted at component " + std::to_string(i));
    }
  }
  if (noise.mean.size() != noise.stddev.size()) throw ConfigError("noise mean and stddev sizes differ");
  for (Index i = 0; i < noise.stddev.size(); ++i) {
    if (!(noise.stddev(i) >= 0.0)) throw ConfigError("noise standard deviations must be nonnegative");
  }
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vector Environment::sample_initial_state(Rng& rng) const {
  Vector s(spec_.n_s);
  for (Index i = 0; i < spec_.n_s; ++i) {
    if (spec_.x_lo && std::isfinite((*spec_.x_lo)(i)) && std::isfinite((*spec_.x_hi)(i))) {
      s(i) = (*spec_.x_lo)(i) + rng.uniform() * ((*spec_.x_hi)(i) - (*spec_.x_lo)(i));
    } else {
      s(i) = rng.normal();
    }
  }
  return s;
}

Vector Environment::sample_disturbance(Rng& rng) const {
  Vector w(spec_.noise.mean.size());
  for (Index i = 0; i < w.size(); ++i) w(i) = spec_.noise.mean(i) + spec_.noise.stddev(i) * rng.normal();
  return w;
}

Transition Environment::step(const Vector& s, const Vector& a, Rng& rng) const {
  require_dim(s.size(), spec_.n_s, "state");
  require_dim(a.size(), spec_.n_a, "action");
  for (Index i = 0; i < spec_.n_a; ++i) {
    const double tol = 1e-9 * (1.0 + std::abs(a(i)));
    if (a(i) < spec_.u_lo(i) - tol || a(i) > spec_.u_hi(i) + tol) {
      throw Error("step: action component " + std::to_string(i) + " outside its bounds");
    }
  }
  Transition tr{s, a, stage_cost(s, a), transition(s, a, sample_disturbance(rng))};
  if (!tr.s_next.allFinite() || !std::isfinite(tr.cost)) throw DivergenceError("step: state left the finite range");
  return tr;
}

LtiEnv::LtiEnv(EnvSpec spec, Matrix A, Matrix B, Matrix T, Matrix S, Matrix R)
    : Environment(std::move(spec)),
      model_(std::make_shared<LinearModel>(std::move(A), std::move(B))),
      T_(std::move(T)),
      S_(std::move(S)),
      R_(std::move(R)) {}

double LtiEnv::stage_cost(const Vector& s, const Vector& a) const {
  return s.dot(T_ * s) + 2.0 * s.dot(S_ * a) + a.dot(R_ * a);
}

Vector LtiEnv::transition(const Vector& s, const Vector& a, const Vector& w) const {
  return model_->next(s, a) + w;
}

Vector LtiEnv::default_initial_state() const { return Vector::Ones(spec().n_s); }

std::shared_ptr<LtiEnv> make_lti_env(const Matrix& A, const Matrix& B, const Matrix& T, const Matrix& S,
                                     const Matrix& R, double gamma, double noise_sigma, const LtiOptions& options) {
  const Index ns = A.rows();
  const Index na = B.cols();
  require_dim(A.cols(), ns, "A");
  require_dim(B.rows(), ns, "B");
  require_dim(T.rows(), ns, "T");
  require_dim(T.cols(), ns, "T");
  require_dim(S.rows(), ns, "S");
  require_dim(S.cols(), na, "S");
  require_dim(R.rows(), na, "R");
  require_dim(R.cols(), na, "R");
  const double tol = 1e-12;
  if ((T - T.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + T.cwiseAbs().maxCoeff())) {
    throw ConfigError("make_lti_env: T must be symmetric");
  }
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + R.cwiseAbs().maxCoeff())) {
    throw ConfigError("make_lti_env: R must be symmetric");
  }
  if (Eigen::LLT<Matrix>(R).info() != Eigen::Success) throw ConfigError("make_lti_env: R must be positive definite");
  if (!(noise_sigma >= 0.0)) throw ConfigError("make_lti_env: noise sigma must be nonnegative");

  EnvSpec spec;
  spec.n_s = ns;
  spec.n_a = na;
  spec.gamma = gamma;
  const double inf = std::numeric_limits<double>::infinity();
  spec.u_lo = options.u_lo.value_or(Vector::Constant(na, -inf));
  spec.u_hi = options.u_hi.value_or(Vector::Constant(na, inf));
  spec.x_lo = options.x_lo;
  spec.x_hi = options.x_hi;
  spec.noise = {Vector::Zero(ns), Vector::Constant(ns, noise_sigma)};
  return std::make_shared<LtiEnv>(std::move(spec), A, B, T, S, R);
}

void write_trajectory_csv(std::ostream& out, const std::vector<Transition>& trajectory) {
  if (trajectory.empty()) {
    out << "t,cost\n";
    return;
  }
  const Index ns = trajectory.front().s.size();
  const Index na = trajectory.front().a.size();
  out << 't';
  for (Index i = 0; i < ns; ++i) out << ",s" << i;
  for (Index i = 0; i < na; ++i) out << ",a" << i;
  out << ",cost\n";
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory[t];
    out << t;
    for (Index i = 0; i < ns; ++i) out << ',' << csv::number(tr.s(i));
    for (Index i = 0; i < na; ++i) out << ',' << csv::number(tr.a(i));
    out << ',' << csv::number(tr.cost) << '\n';
  }
}

}  // namespace mpcrl::env
