#include "mpcrl/evaporation.hpp"

#include <cmath>

namespace mpcrl::env {

namespace {

/// Second-order forward-mode number over the four inputs (X2, P2, P100, F200).
struct Jet {
  double v = 0.0;
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();

  static Jet variable(double value, int i) {
    Jet j;
    j.v = value;
    j.g(i) = 1.0;
    return j;
  }
};

Jet operator+(Jet a, const Jet& b) {
  a.v += b.v;
  a.g += b.g;
  a.h += b.h;
  return a;
}
Jet operator-(Jet a, const Jet& b) {
  a.v -= b.v;
  a.g -= b.g;
  a.h -= b.h;
  return a;
}
Jet operator+(Jet a, double c) {
  a.v += c;
  return a;
}
Jet operator-(Jet a, double c) {
  a.v -= c;
  return a;
}
Jet operator-(double c, Jet a) {
  a.v = c - a.v;
  a.g = -a.g;
  a.h = -a.h;
  return a;
}
Jet operator*(Jet a, double c) {
  a.v *= c;
  a.g *= c;
  a.h *= c;
  return a;
}
Jet operator*(double c, const Jet& a) { return a * c; }
Jet operator/(const Jet& a, double c) { return a * (1.0 / c); }
Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  r.g = a.v * b.g + b.v * a.g;
  r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}
Jet reciprocal(const Jet& b) {
  Jet r;
  const double inv = 1.0 / b.v;
  r.v = inv;
  r.g = -inv * inv * b.g;
  r.h = -inv * inv * b.h + 2.0 * inv * inv * inv * b.g * b.g.transpose();
  return r;
}
Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

/// Time derivatives (dX2, dP2), heat duty Q100 and product flow F2.
template <class T>
struct Balance {
  T dX2;
  T dP2;
  T Q100;
  T F2;
};

template <class T>
Balance<T> balance(const T& X2, const T& P2, const T& P100, const T& F200, const Eigen::Vector4d& exo) {
  const double X1 = exo(0), F1 = exo(1), T1 = exo(2), T200 = exo(3);
  const T T2 = 0.5616 * P2 + 0.3126 * X2 + 48.43;
  const T T3 = 0.507 * P2 + 55.0;
  const T T100 = 0.1538 * P100 + 90.0;
  const T Q100 = 0.16 * (F1 + 50.0) * (T100 - T2);
  const T F4 = (Q100 - 0.07 * F1 * (T2 - T1)) / 38.5;
  const T Q200 = 0.9576 * F200 * (T3 - T200) / (0.14 * F200 + 6.84);
  const T F5 = Q200 / 38.5;
  const T F2 = F1 - F4;
  return {(F1 * X1 - F2 * X2) / 20.0, (F4 - F5) / 4.0, Q100, F2};
}

Balance<Jet> balance_jet(const Vector& x, const Vector& u, const Eigen::Vector4d& exo) {
  return balance(Jet::variable(x(0), 0), Jet::variable(x(1), 1), Jet::variable(u(0), 2), Jet::variable(u(1), 3), exo);
}

void check_xu(const Vector& x, const Vector& u) {
  require_dim(x.size(), 2, "evaporation state");
  require_dim(u.size(), 2, "evaporation input");
}

EnvSpec make_spec(const EvaporationConfig& c) {
  c.validate();
  EnvSpec spec;
  spec.n_s = 2;
  spec.n_a = 2;
  spec.gamma = c.gamma;
  spec.u_lo = c.u_lo;
  spec.u_hi = c.u_hi;
  spec.x_lo = Vector(c.x_lo);
  spec.x_hi = Vector(c.x_hi);
  spec.noise = {c.nominal, c.noise ? Vector(c.sigma) : Vector(Vector::Zero(4))};
  return spec;
}

}  // namespace

void EvaporationConfig::validate() const {
  for (int i = 0; i < 2; ++i) {
    if (!(x_lo(i) < x_hi(i))) throw ConfigError("evaporation: state bounds inverted at component " + std::to_string(i));
    if (!(u_lo(i) < u_hi(i))) throw ConfigError("evaporation: input bounds inverted at component " + std::to_string(i));
  }
  if ((sigma.array() < 0.0).any()) throw ConfigError("evaporation: noise sigma must be nonnegative");
  if (!(dt > 0.0)) throw ConfigError("evaporation: dt must be positive");
  if (!(cost_scale > 0.0)) throw ConfigError("evaporation: cost_scale must be positive");
  if (violation_quadratic < 0.0 || violation_linear < 0.0) {
    throw ConfigError("evaporation: violation weights must be nonnegative");
  }
}

EvaporationModel::EvaporationModel(Eigen::Vector4d exogenous, double dt) : exogenous_(std::move(exogenous)), dt_(dt) {}

Vector EvaporationModel::next(const Vector& x, const Vector& u) const {
  check_xu(x, u);
  const Balance<double> b = balance(x(0), x(1), u(0), u(1), exogenous_);
  return Eigen::Vector2d(x(0) + dt_ * b.dX2, x(1) + dt_ * b.dP2);
}

Matrix EvaporationModel::jacobian(const Vector& x, const Vector& u) const {
  check_xu(x, u);
  const Balance<Jet> b = balance_jet(x, u, exogenous_);
  Matrix J(2, 4);
  J.row(0) = dt_ * b.dX2.g.transpose();
  J.row(1) = dt_ * b.dP2.g.transpose();
  J(0, 0) += 1.0;
  J(1, 1) += 1.0;
  return J;
}

Matrix EvaporationModel::weighted_hessian(const Vector& x, const Vector& u, const Vector& lambda) const {
  check_xu(x, u);
  require_dim(lambda.size(), 2, "multiplier");
  const Balance<Jet> b = balance_jet(x, u, exogenous_);
  return dt_ * (lambda(0) * b.dX2.h + lambda(1) * b.dP2.h);
}

EvaporationEnv::EvaporationEnv(const EvaporationConfig& config)
    : Environment(make_spec(config)),
      config_(config),
      model_(std::make_shared<EvaporationModel>(config.nominal, config.dt)) {}

double EvaporationEnv::economic_cost(const Vector& s, const Vector& a) const {
  check_xu(s, a);
  const Balance<double> b = balance(s(0), s(1), a(0), a(1), config_.nominal);
  return 10.09 * (b.F2 + 50.0) + 600.0 * b.Q100 / 36.6 + 0.6 * a(1);
}

Vector EvaporationEnv::bound_violation(const Vector& s) const {
  require_dim(s.size(), 2, "evaporation state");
  return (Vector(config_.x_lo) - s).cwiseMax(0.0) + (s - Vector(config_.x_hi)).cwiseMax(0.0);
}

double EvaporationEnv::stage_cost(const Vector& s, const Vector& a) const {
  const Vector v = bound_violation(s);
  return economic_cost(s, a) / config_.cost_scale + config_.violation_quadratic * v.squaredNorm() +
         config_.violation_linear * v.sum();
}

Vector EvaporationEnv::transition(const Vector& s, const Vector& a, const Vector& w) const {
  check_xu(s, a);
  require_dim(w.size(), 4, "evaporation disturbance");
  const Balance<double> b = balance(s(0), s(1), a(0), a(1), Eigen::Vector4d(w));
  return Eigen::Vector2d(s(0) + config_.dt * b.dX2, s(1) + config_.dt * b.dP2);
}

Vector EvaporationEnv::default_initial_state() const { return config_.initial_state; }

Vector EvaporationEnv::steady_state(const Vector& u) const {
  require_dim(u.size(), 2, "evaporation input");
  Vector x = default_initial_state();
  for (int it = 0; it < 100; ++it) {
    const Balance<Jet> b = balance_jet(x, u, config_.nominal);
    const Eigen::Vector2d r(b.dX2.v, b.dP2.v);
    if (r.cwiseAbs().maxCoeff() < 1e-13) return x;
    Eigen::Matrix2d J;
    J.row(0) = b.dX2.g.head<2>().transpose();
    J.row(1) = b.dP2.g.head<2>().transpose();
    x -= J.fullPivLu().solve(r);
  }
  throw Error("steady_state: Newton iteration did not converge");
}

Vector EvaporationEnv::steady_input(const Vector& x) const {
  require_dim(x.size(), 2, "evaporation state");
  Vector u = 0.5 * (Vector(config_.u_lo) + Vector(config_.u_hi));
  for (int it = 0; it < 100; ++it) {
    const Balance<Jet> b = balance_jet(x, u, config_.nominal);
    const Eigen::Vector2d r(b.dX2.v, b.dP2.v);
    if (r.cwiseAbs().maxCoeff() < 1e-13) return u;
    Eigen::Matrix2d J;
    J.row(0) = b.dX2.g.tail<2>().transpose();
    J.row(1) = b.dP2.g.tail<2>().transpose();
    u -= J.fullPivLu().solve(r);
  }
  throw Error("steady_input: Newton iteration did not converge");
}

std::shared_ptr<EvaporationEnv> make_evaporation_like_env(const EvaporationConfig& config) {
  return std::make_shared<EvaporationEnv>(config);
}

}  // namespace mpcrl::env
