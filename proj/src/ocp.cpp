#include "mpcrl/ocp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mpcrl::ocp {

namespace {

double quad(const Matrix& Hsym, const Vector& h, double c, const Vector& w) { return 0.5 * w.dot(Hsym * w) + h.dot(w) + c; }

/// d/dH_ij of 0.5 w'Hw for every column-major entry (i, j), scaled.
void add_quad_theta(Vector& out, Index offset, const Vector& w, double scale) {
  const Index d = w.size();
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) out(offset + i + j * d) += scale * 0.5 * w(i) * w(j);
  }
}

/// d/dH_ij of the gradient 0.5 (H + H') w, rows mapped through var_offset.
void add_quad_gradient_theta(Matrix& out, Index var_offset, Index offset, const Vector& w, double scale) {
  const Index d = w.size();
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) {
      const Index col = offset + i + j * d;
      out(var_offset + i, col) += scale * 0.5 * w(j);
      out(var_offset + j, col) += scale * 0.5 * w(i);
    }
  }
}

void check_action(const Vector& a, const Vector& u_lo, const Vector& u_hi) {
  for (Index i = 0; i < a.size(); ++i) {
    const double tol = 1e-9 * (1.0 + std::abs(a(i)));
    if (!(a(i) >= u_lo(i) - tol && a(i) <= u_hi(i) + tol)) {
      throw Error("pinned action component " + std::to_string(i) + " violates the input bounds");
    }
  }
}

Vector clamp(const Vector& v, const Vector& lo, const Vector& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

const char* to_string(StateConstraints c) {
  switch (c) {
    case StateConstraints::none: return "none";
    case StateConstraints::soft: return "soft";
    case StateConstraints::hard: return "hard";
  }
  return "unknown";
}

void describe_layout(std::ostream& out, const ParamLayout& layout) {
  out << "parameters " << layout.size() << '\n';
  for (const auto& b : layout.blocks()) {
    out << "  block " << b.name << ' ' << b.rows << 'x' << b.cols << (b.symmetric ? " sym" : "") << " offset "
        << b.offset << '\n';
  }
}

Index nonzeros(const Matrix& m) { return (m.array() != 0.0).count(); }

}  // namespace

// ---------------------------------------------------------------------------
// ThetaNonCondensed

ParamLayout ThetaNonCondensed::layout(Index nx, Index nu) {
  ParamLayout l;
  l.add("H_lambda", nx, nx, true)
      .add("h_lambda", nx)
      .add("c_lambda", 1)
      .add("H_Vf", nx, nx, true)
      .add("h_Vf", nx)
      .add("c_Vf", 1)
      .add("H_l", nx + nu, nx + nu, true)
      .add("h_l", nx + nu)
      .add("c_l", 1)
      .add("c_f", nx)
      .add("x_lo", nx)
      .add("x_hi", nx);
  return l;
}

std::vector<PdConstraint> ThetaNonCondensed::pd_blocks(Index nx, Index nu) {
  return {{"H_l", 0, nx + nu}, {"H_Vf", 0, nx}};
}

ThetaNonCondensed ThetaNonCondensed::zeros(Index nx, Index nu) {
  ThetaNonCondensed t;
  t.H_lambda = Matrix::Zero(nx, nx);
  t.h_lambda = Vector::Zero(nx);
  t.H_Vf = Matrix::Zero(nx, nx);
  t.h_Vf = Vector::Zero(nx);
  t.H_l = Matrix::Zero(nx + nu, nx + nu);
  t.h_l = Vector::Zero(nx + nu);
  t.c_f = Vector::Zero(nx);
  t.x_lo = Vector::Zero(nx);
  t.x_hi = Vector::Zero(nx);
  return t;
}

ThetaNonCondensed ThetaNonCondensed::naive(const Vector& x_lo, const Vector& x_hi, Index nu) {
  require_dim(x_hi.size(), x_lo.size(), "x_hi");
  ThetaNonCondensed t = zeros(x_lo.size(), nu);
  t.H_l.setIdentity();
  t.x_lo = x_lo;
  t.x_hi = x_hi;
  return t;
}

ThetaNonCondensed ThetaNonCondensed::unflatten(const Vector& flat, Index nx, Index nu) {
  const ParamLayout l = layout(nx, nu);
  require_dim(flat.size(), l.size(), "non-condensed parameter vector");
  ThetaNonCondensed t;
  t.H_lambda = l.get(flat, "H_lambda");
  t.h_lambda = l.get(flat, "h_lambda");
  t.c_lambda = l.get(flat, "c_lambda")(0, 0);
  t.H_Vf = l.get(flat, "H_Vf");
  t.h_Vf = l.get(flat, "h_Vf");
  t.c_Vf = l.get(flat, "c_Vf")(0, 0);
  t.H_l = l.get(flat, "H_l");
  t.h_l = l.get(flat, "h_l");
  t.c_l = l.get(flat, "c_l")(0, 0);
  t.c_f = l.get(flat, "c_f");
  t.x_lo = l.get(flat, "x_lo");
  t.x_hi = l.get(flat, "x_hi");
  return t;
}

Vector ThetaNonCondensed::flatten() const {
  validate();
  const ParamLayout l = layout(nx(), nu());
  Vector flat(l.size());
  l.set(flat, "H_lambda", H_lambda);
  l.set(flat, "h_lambda", h_lambda);
  l.set(flat, "c_lambda", Matrix::Constant(1, 1, c_lambda));
  l.set(flat, "H_Vf", H_Vf);
  l.set(flat, "h_Vf", h_Vf);
  l.set(flat, "c_Vf", Matrix::Constant(1, 1, c_Vf));
  l.set(flat, "H_l", H_l);
  l.set(flat, "h_l", h_l);
  l.set(flat, "c_l", Matrix::Constant(1, 1, c_l));
  l.set(flat, "c_f", c_f);
  l.set(flat, "x_lo", x_lo);
  l.set(flat, "x_hi", x_hi);
  return flat;
}

void ThetaNonCondensed::validate() const {
  const Index n = nx();
  const Index w = h_l.size();
  if (w < n) throw DimensionError("h_l must have nx + nu entries");
  require_dim(H_lambda.rows(), n, "H_lambda");
  require_dim(H_lambda.cols(), n, "H_lambda");
  require_dim(h_lambda.size(), n, "h_lambda");
  require_dim(H_Vf.rows(), n, "H_Vf");
  require_dim(H_Vf.cols(), n, "H_Vf");
  require_dim(h_Vf.size(), n, "h_Vf");
  require_dim(H_l.rows(), w, "H_l");
  require_dim(H_l.cols(), w, "H_l");
  require_dim(x_lo.size(), n, "x_lo");
  require_dim(x_hi.size(), n, "x_hi");
}

// ---------------------------------------------------------------------------
// ThetaCondensed

ParamLayout ThetaCondensed::layout(Index nx, Index nu, Index N, Index rows) {
  const Index nz = nx + N * nu;
  ParamLayout l;
  l.add("M", nz, nz, true).add("m", nz).add("c", 1).add("C", rows, nz).add("d", rows);
  return l;
}

std::vector<PdConstraint> ThetaCondensed::pd_blocks(Index nx, Index nu, Index N) { return {{"M", nx, N * nu}}; }

ThetaCondensed ThetaCondensed::unflatten(const Vector& flat, Index nx, Index nu, Index N, Index rows) {
  const ParamLayout l = layout(nx, nu, N, rows);
  require_dim(flat.size(), l.size(), "condensed parameter vector");
  ThetaCondensed t;
  t.nx = nx;
  t.nu = nu;
  t.N = N;
  t.M = l.get(flat, "M");
  t.m = l.get(flat, "m");
  t.c = l.get(flat, "c")(0, 0);
  t.C = l.get(flat, "C");
  t.d = l.get(flat, "d");
  return t;
}

Vector ThetaCondensed::flatten() const {
  validate();
  const ParamLayout l = layout(nx, nu, N, rows());
  Vector flat(l.size());
  l.set(flat, "M", M);
  l.set(flat, "m", m);
  l.set(flat, "c", Matrix::Constant(1, 1, c));
  l.set(flat, "C", C);
  l.set(flat, "d", d);
  return flat;
}

void ThetaCondensed::validate() const {
  if (nx <= 0 || nu <= 0 || N < 1) throw DimensionError("condensed dimensions must be positive");
  require_dim(M.rows(), nz(), "M");
  require_dim(M.cols(), nz(), "M");
  require_dim(m.size(), nz(), "m");
  require_dim(C.cols(), nz(), "C");
  require_dim(d.size(), C.rows(), "d");
}

// ---------------------------------------------------------------------------
// MpcConfig

MpcConfig MpcConfig::defaults(std::shared_ptr<const Dynamics> model, Index N, double gamma) {
  MpcConfig c;
  const Index nx = model->state_dim();
  const Index nu = model->input_dim();
  c.model = std::move(model);
  c.N = N;
  c.gamma = gamma;
  c.W_s = Matrix::Identity(2 * nx, 2 * nx);
  c.w_s = Vector::Ones(2 * nx);
  c.u_lo = Vector::Constant(nu, -std::numeric_limits<double>::infinity());
  c.u_hi = Vector::Constant(nu, std::numeric_limits<double>::infinity());
  return c;
}

void MpcConfig::validate() const {
  if (!model) throw Error("MpcConfig: prediction model missing");
  if (N < 1) throw Error("MpcConfig: horizon must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("MpcConfig: gamma must lie in (0, 1]");
  const Index nx = model->state_dim();
  const Index nu = model->input_dim();
  require_dim(u_lo.size(), nu, "u_lo");
  require_dim(u_hi.size(), nu, "u_hi");
  if (cost_center.size() != 0) {
    require_dim(cost_center.size(), nx + nu, "cost_center");
    if (!cost_center.allFinite()) throw Error("MpcConfig: cost_center must be finite");
  }
  for (Index i = 0; i < nu; ++i) {
    if (!(u_lo(i) < u_hi(i))) throw Error("MpcConfig: input bounds inverted");
  }
  if (constraints == StateConstraints::soft) {
    require_dim(W_s.rows(), 2 * nx, "W_s");
    require_dim(W_s.cols(), 2 * nx, "W_s");
    require_dim(w_s.size(), 2 * nx, "w_s");
    if ((w_s.array() < 0.0).any()) throw Error("MpcConfig: w_s must be nonnegative");
    // The QP kernel needs a strictly convex slack penalty.
    if (Eigen::LLT<Matrix>(symmetric_part(W_s)).info() != Eigen::Success) {
      throw Error("MpcConfig: W_s must be positive definite");
    }
  }
}

// ---------------------------------------------------------------------------
// OcpInstance

OcpInstance::OcpInstance(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s,
                         std::optional<Vector> a)
    : theta_(theta), config_(config), s_(s), a_(std::move(a)) {
  config_.validate();
  theta_.validate();
  nx_ = config_.model->state_dim();
  nu_ = config_.model->input_dim();
  N_ = config_.N;
  require_dim(theta_.nx(), nx_, "theta state dimension");
  require_dim(theta_.nu(), nu_, "theta input dimension");
  require_dim(s_.size(), nx_, "initial state");
  if (a_) {
    require_dim(a_->size(), nu_, "pinned action");
    check_action(*a_, config_.u_lo, config_.u_hi);
  }
  n_ = nx_ * (N_ + 1) + nu_ * N_ + num_slacks();
  layout_ = ThetaNonCondensed::layout(nx_, nu_);
  Hlam_ = symmetric_part(theta_.H_lambda);
  Hl_ = symmetric_part(theta_.H_l);
  Hvf_ = symmetric_part(theta_.H_Vf);
  if (soft()) Ws_ = symmetric_part(config_.W_s);
  center_ = config_.cost_center.size() != 0 ? config_.cost_center : Vector(Vector::Zero(nx_ + nu_));
  discount_.resize(static_cast<std::size_t>(N_ + 1));
  double g = 1.0;
  for (auto& d : discount_) {
    d = g;
    g *= config_.gamma;
  }
  if (config_.constraints != StateConstraints::none) {
    for (Index k = 0; k <= N_; ++k) {
      for (Index i = 0; i < nx_; ++i) {
        if (std::isfinite(theta_.x_lo(i))) state_rows_.push_back({k, i, false});
      }
      for (Index i = 0; i < nx_; ++i) {
        if (std::isfinite(theta_.x_hi(i))) state_rows_.push_back({k, i, true});
      }
    }
  }
  for (Index k = pinned() ? 1 : 0; k < N_; ++k) {
    for (Index i = 0; i < nu_; ++i) {
      if (std::isfinite(config_.u_hi(i))) input_rows_.push_back({k, i, true});
      if (std::isfinite(config_.u_lo(i))) input_rows_.push_back({k, i, false});
    }
  }
}

Vector OcpInstance::stage_point(const Vector& z, Index k) const {
  Vector w(nx_ + nu_);
  w << z.segment(state_index(k), nx_), z.segment(input_index(k), nu_);
  return w - center_;
}

Vector OcpInstance::state_point(const Vector& z, Index k) const {
  return z.segment(state_index(k), nx_) - center_.head(nx_);
}

Index OcpInstance::num_inequalities() const {
  return static_cast<Index>(state_rows_.size()) + num_slacks() + static_cast<Index>(input_rows_.size());
}

double OcpInstance::objective(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  double f = quad(Hlam_, theta_.h_lambda, theta_.c_lambda, state_point(z, 0));
  for (Index k = 0; k < N_; ++k) f += weight(k) * quad(Hl_, theta_.h_l, theta_.c_l, stage_point(z, k));
  f += weight(N_) * quad(Hvf_, theta_.h_Vf, theta_.c_Vf, state_point(z, N_));
  if (soft()) {
    for (Index k = 0; k <= N_; ++k) {
      const auto sig = z.segment(slack_index(k), 2 * nx_);
      f += weight(k) * (sig.dot(Ws_ * sig) + config_.w_s.dot(sig));
    }
  }
  return f;
}

Vector OcpInstance::objective_gradient(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  Vector g = Vector::Zero(n_);
  g.segment(0, nx_) += Hlam_ * state_point(z, 0) + theta_.h_lambda;
  for (Index k = 0; k < N_; ++k) {
    const Vector gw = weight(k) * (Hl_ * stage_point(z, k) + theta_.h_l);
    g.segment(state_index(k), nx_) += gw.head(nx_);
    g.segment(input_index(k), nu_) += gw.tail(nu_);
  }
  g.segment(state_index(N_), nx_) += weight(N_) * (Hvf_ * state_point(z, N_) + theta_.h_Vf);
  if (soft()) {
    for (Index k = 0; k <= N_; ++k) {
      g.segment(slack_index(k), 2 * nx_) =
          weight(k) * (2.0 * Ws_ * z.segment(slack_index(k), 2 * nx_) + config_.w_s);
    }
  }
  return g;
}

Matrix OcpInstance::objective_hessian(const Vector& /*z*/) const {
  Matrix H = Matrix::Zero(n_, n_);
  H.block(0, 0, nx_, nx_) += Hlam_;
  for (Index k = 0; k < N_; ++k) {
    const Index xi = state_index(k);
    const Index ui = input_index(k);
    const double c = weight(k);
    H.block(xi, xi, nx_, nx_) += c * Hl_.topLeftCorner(nx_, nx_);
    H.block(xi, ui, nx_, nu_) += c * Hl_.topRightCorner(nx_, nu_);
    H.block(ui, xi, nu_, nx_) += c * Hl_.bottomLeftCorner(nu_, nx_);
    H.block(ui, ui, nu_, nu_) += c * Hl_.bottomRightCorner(nu_, nu_);
  }
  H.block(state_index(N_), state_index(N_), nx_, nx_) += weight(N_) * Hvf_;
  if (soft()) {
    for (Index k = 0; k <= N_; ++k) {
      H.block(slack_index(k), slack_index(k), 2 * nx_, 2 * nx_) = 2.0 * weight(k) * Ws_;
    }
  }
  return H;
}

Vector OcpInstance::equalities(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  Vector c(num_equalities());
  c.segment(0, nx_) = z.segment(0, nx_) - s_;
  for (Index k = 0; k < N_; ++k) {
    const Vector x = z.segment(state_index(k), nx_);
    const Vector u = z.segment(input_index(k), nu_);
    c.segment(nx_ * (k + 1), nx_) = config_.model->next(x, u) + theta_.c_f - z.segment(state_index(k + 1), nx_);
  }
  if (pinned()) c.tail(nu_) = z.segment(input_index(0), nu_) - *a_;
  return c;
}

Matrix OcpInstance::equality_jacobian(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  Matrix J = Matrix::Zero(num_equalities(), n_);
  J.block(0, 0, nx_, nx_).setIdentity();
  for (Index k = 0; k < N_; ++k) {
    const Matrix Jf = config_.model->jacobian(z.segment(state_index(k), nx_), z.segment(input_index(k), nu_));
    const Index r = nx_ * (k + 1);
    J.block(r, state_index(k), nx_, nx_) = Jf.leftCols(nx_);
    J.block(r, input_index(k), nx_, nu_) = Jf.rightCols(nu_);
    J.block(r, state_index(k + 1), nx_, nx_) -= Matrix::Identity(nx_, nx_);
  }
  if (pinned()) J.block(nx_ * (N_ + 1), input_index(0), nu_, nu_).setIdentity();
  return J;
}

Matrix OcpInstance::equality_hessian(const Vector& z, const Vector& chi) const {
  require_dim(chi.size(), num_equalities(), "equality multipliers");
  Matrix H = Matrix::Zero(n_, n_);
  if (config_.model->is_affine()) return H;
  for (Index k = 0; k < N_; ++k) {
    const Index xi = state_index(k);
    const Index ui = input_index(k);
    const Matrix h =
        config_.model->weighted_hessian(z.segment(xi, nx_), z.segment(ui, nu_), chi.segment(nx_ * (k + 1), nx_));
    H.block(xi, xi, nx_, nx_) += h.topLeftCorner(nx_, nx_);
    H.block(xi, ui, nx_, nu_) += h.topRightCorner(nx_, nu_);
    H.block(ui, xi, nu_, nx_) += h.bottomLeftCorner(nu_, nx_);
    H.block(ui, ui, nu_, nu_) += h.bottomRightCorner(nu_, nu_);
  }
  return H;
}

Vector OcpInstance::inequalities(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  Vector c(num_inequalities());
  Index r = 0;
  for (const auto& row : state_rows_) {
    const double x = z(state_index(row.k) + row.i);
    double v = row.upper ? x - theta_.x_hi(row.i) : theta_.x_lo(row.i) - x;
    if (soft()) v -= z(slack_index(row.k) + (row.upper ? nx_ : 0) + row.i);
    c(r++) = v;
  }
  for (Index j = 0; j < num_slacks(); ++j) c(r++) = -z(slack_index(0) + j);
  for (const auto& row : input_rows_) {
    const double u = z(input_index(row.k) + row.i);
    c(r++) = row.upper ? u - config_.u_hi(row.i) : config_.u_lo(row.i) - u;
  }
  return c;
}

Matrix OcpInstance::inequality_jacobian(const Vector& /*z*/) const {
  Matrix J = Matrix::Zero(num_inequalities(), n_);
  Index r = 0;
  for (const auto& row : state_rows_) {
    J(r, state_index(row.k) + row.i) = row.upper ? 1.0 : -1.0;
    if (soft()) J(r, slack_index(row.k) + (row.upper ? nx_ : 0) + row.i) = -1.0;
    ++r;
  }
  for (Index j = 0; j < num_slacks(); ++j) J(r++, slack_index(0) + j) = -1.0;
  for (const auto& row : input_rows_) J(r++, input_index(row.k) + row.i) = row.upper ? 1.0 : -1.0;
  return J;
}

Vector OcpInstance::initial_guess() const {
  Vector z = Vector::Zero(n_);
  Vector u0 = Vector::Zero(nu_);
  for (Index i = 0; i < nu_; ++i) {
    const bool lo = std::isfinite(config_.u_lo(i));
    const bool hi = std::isfinite(config_.u_hi(i));
    if (lo && hi) {
      u0(i) = 0.5 * (config_.u_lo(i) + config_.u_hi(i));
    } else if (lo) {
      u0(i) = std::max(0.0, config_.u_lo(i));
    } else if (hi) {
      u0(i) = std::min(0.0, config_.u_hi(i));
    }
  }
  Vector x = s_;
  for (Index k = 0; k <= N_; ++k) {
    z.segment(state_index(k), nx_) = x;
    if (k == N_) break;
    const Vector u = (k == 0 && pinned()) ? *a_ : clamp(u0, config_.u_lo, config_.u_hi);
    z.segment(input_index(k), nu_) = u;
    Vector next = config_.model->next(x, u) + theta_.c_f;
    if (!next.allFinite()) next = x;
    x = next;
  }
  if (soft()) {
    for (Index k = 0; k <= N_; ++k) {
      const Vector xk = z.segment(state_index(k), nx_);
      for (Index i = 0; i < nx_; ++i) {
        if (std::isfinite(theta_.x_lo(i))) z(slack_index(k) + i) = std::max(0.0, theta_.x_lo(i) - xk(i));
        if (std::isfinite(theta_.x_hi(i))) z(slack_index(k) + nx_ + i) = std::max(0.0, xk(i) - theta_.x_hi(i));
      }
    }
  }
  return z;
}

Vector OcpInstance::objective_theta(const Vector& z) const {
  require_dim(z.size(), n_, "decision vector");
  Vector g = Vector::Zero(layout_.size());
  const Vector x0 = state_point(z, 0);
  add_quad_theta(g, layout_.block("H_lambda").offset, x0, 1.0);
  g.segment(layout_.block("h_lambda").offset, nx_) += x0;
  g(layout_.block("c_lambda").offset) += 1.0;
  const Index oH = layout_.block("H_l").offset;
  const Index oh = layout_.block("h_l").offset;
  const Index oc = layout_.block("c_l").offset;
  for (Index k = 0; k < N_; ++k) {
    const Vector w = stage_point(z, k);
    add_quad_theta(g, oH, w, weight(k));
    g.segment(oh, nx_ + nu_) += weight(k) * w;
    g(oc) += weight(k);
  }
  const Vector xN = state_point(z, N_);
  add_quad_theta(g, layout_.block("H_Vf").offset, xN, weight(N_));
  g.segment(layout_.block("h_Vf").offset, nx_) += weight(N_) * xN;
  g(layout_.block("c_Vf").offset) += weight(N_);
  return g;
}

Matrix OcpInstance::equality_theta(const Vector& /*z*/) const {
  Matrix D = Matrix::Zero(num_equalities(), layout_.size());
  const Index of = layout_.block("c_f").offset;
  for (Index k = 0; k < N_; ++k) D.block(nx_ * (k + 1), of, nx_, nx_).setIdentity();
  return D;
}

Matrix OcpInstance::inequality_theta(const Vector& /*z*/) const {
  Matrix D = Matrix::Zero(num_inequalities(), layout_.size());
  const Index olo = layout_.block("x_lo").offset;
  const Index ohi = layout_.block("x_hi").offset;
  Index r = 0;
  for (const auto& row : state_rows_) {
    if (row.upper) {
      D(r, ohi + row.i) = -1.0;
    } else {
      D(r, olo + row.i) = 1.0;
    }
    ++r;
  }
  return D;
}

Matrix OcpInstance::lagrangian_gradient_theta(const Vector& z, const Vector& /*chi*/, const Vector& /*mu*/) const {
  require_dim(z.size(), n_, "decision vector");
  // Constraint Jacobians do not depend on theta, so only the objective
  // contributes.
  Matrix D = Matrix::Zero(n_, layout_.size());
  const Vector x0 = state_point(z, 0);
  add_quad_gradient_theta(D, 0, layout_.block("H_lambda").offset, x0, 1.0);
  D.block(0, layout_.block("h_lambda").offset, nx_, nx_).setIdentity();

  const Index oH = layout_.block("H_l").offset;
  const Index oh = layout_.block("h_l").offset;
  const Index nw = nx_ + nu_;
  for (Index k = 0; k < N_; ++k) {
    const Vector w = stage_point(z, k);
    // Row p of w maps to variable index var(p).
    auto var = [&](Index p) { return p < nx_ ? state_index(k) + p : input_index(k) + p - nx_; };
    const double c = weight(k);
    for (Index j = 0; j < nw; ++j) {
      for (Index i = 0; i < nw; ++i) {
        const Index col = oH + i + j * nw;
        D(var(i), col) += c * 0.5 * w(j);
        D(var(j), col) += c * 0.5 * w(i);
      }
    }
    for (Index p = 0; p < nw; ++p) D(var(p), oh + p) += c;
  }
  const Vector xN = state_point(z, N_);
  add_quad_gradient_theta(D, state_index(N_), layout_.block("H_Vf").offset, xN, weight(N_));
  D.block(state_index(N_), layout_.block("h_Vf").offset, nx_, nx_) += weight(N_) * Matrix::Identity(nx_, nx_);
  return D;
}

std::string OcpInstance::debug_string() const {
  std::ostringstream out;
  out << "ocp non-condensed\n";
  out << "horizon " << N_ << " nx " << nx_ << " nu " << nu_ << " gamma " << config_.gamma << '\n';
  out << "state_constraints " << to_string(config_.constraints) << '\n';
  out << "pinned " << (pinned() ? "yes" : "no") << '\n';
  out << "variables " << n_ << " (states " << nx_ * (N_ + 1) << ", inputs " << nu_ * N_ << ", slacks "
      << num_slacks() << ")\n";
  out << "equalities " << num_equalities() << " (model " << nx_ * (N_ + 1) << ", pin " << num_pin_rows() << ")\n";
  out << "inequalities " << num_inequalities() << " (state " << state_rows_.size() << ", slack sign "
      << num_slacks() << ", input " << input_rows_.size() << ")\n";
  const Vector z = initial_guess();
  out << "nnz hessian " << nonzeros(objective_hessian(z)) << " equality_jacobian "
      << nonzeros(equality_jacobian(z)) << " inequality_jacobian " << nonzeros(inequality_jacobian(z)) << '\n';
  describe_layout(out, layout_);
  return out.str();
}

OcpInstance build_q_problem(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s, const Vector& a) {
  return OcpInstance(theta, config, s, a);
}

OcpInstance build_v_problem(const ThetaNonCondensed& theta, const MpcConfig& config, const Vector& s) {
  return OcpInstance(theta, config, s, std::nullopt);
}

// ---------------------------------------------------------------------------
// QpInstance

QpInstance::QpInstance(const ThetaCondensed& theta, const Vector& s, std::optional<Vector> a)
    : theta_(theta), s_(s), a_(std::move(a)) {
  theta_.validate();
  require_dim(s_.size(), theta_.nx, "initial state");
  if (a_) require_dim(a_->size(), theta_.nu, "pinned action");
  Msym_ = symmetric_part(theta_.M);
  layout_ = ThetaCondensed::layout(theta_.nx, theta_.nu, theta_.N, theta_.rows());
}

double QpInstance::objective(const Vector& z) const {
  require_dim(z.size(), theta_.nz(), "decision vector");
  return z.dot(Msym_ * z) + theta_.m.dot(z) + theta_.c;
}

Vector QpInstance::objective_gradient(const Vector& z) const {
  require_dim(z.size(), theta_.nz(), "decision vector");
  return 2.0 * Msym_ * z + theta_.m;
}

Matrix QpInstance::objective_hessian(const Vector& /*z*/) const { return 2.0 * Msym_; }

Vector QpInstance::equalities(const Vector& z) const {
  Vector c(num_equalities());
  c.head(theta_.nx) = z.head(theta_.nx) - s_;
  if (pinned()) c.tail(theta_.nu) = z.segment(theta_.nx, theta_.nu) - *a_;
  return c;
}

Matrix QpInstance::equality_jacobian(const Vector& /*z*/) const {
  Matrix J = Matrix::Zero(num_equalities(), theta_.nz());
  J.topLeftCorner(theta_.nx, theta_.nx).setIdentity();
  if (pinned()) J.block(theta_.nx, theta_.nx, theta_.nu, theta_.nu).setIdentity();
  return J;
}

Vector QpInstance::inequalities(const Vector& z) const { return theta_.C * z - theta_.d; }

Matrix QpInstance::inequality_jacobian(const Vector& /*z*/) const { return theta_.C; }

Vector QpInstance::initial_guess() const {
  Vector z = Vector::Zero(theta_.nz());
  z.head(theta_.nx) = s_;
  if (pinned()) z.segment(theta_.nx, theta_.nu) = *a_;
  return z;
}

Vector QpInstance::objective_theta(const Vector& z) const {
  Vector g = Vector::Zero(layout_.size());
  const Index nz = theta_.nz();
  const Index oM = layout_.block("M").offset;
  for (Index j = 0; j < nz; ++j) {
    for (Index i = 0; i < nz; ++i) g(oM + i + j * nz) = z(i) * z(j);
  }
  g.segment(layout_.block("m").offset, nz) = z;
  g(layout_.block("c").offset) = 1.0;
  return g;
}

Matrix QpInstance::equality_theta(const Vector& /*z*/) const {
  return Matrix::Zero(num_equalities(), layout_.size());
}

Matrix QpInstance::inequality_theta(const Vector& z) const {
  const Index rows = theta_.rows();
  Matrix D = Matrix::Zero(rows, layout_.size());
  const Index oC = layout_.block("C").offset;
  const Index od = layout_.block("d").offset;
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < theta_.nz(); ++j) D(r, oC + r + j * rows) = z(j);
    D(r, od + r) = -1.0;
  }
  return D;
}

Matrix QpInstance::lagrangian_gradient_theta(const Vector& z, const Vector& /*chi*/, const Vector& mu) const {
  const Index nz = theta_.nz();
  const Index rows = theta_.rows();
  Matrix D = Matrix::Zero(nz, layout_.size());
  const Index oM = layout_.block("M").offset;
  for (Index j = 0; j < nz; ++j) {
    for (Index i = 0; i < nz; ++i) {
      D(i, oM + i + j * nz) += z(j);
      D(j, oM + i + j * nz) += z(i);
    }
  }
  D.block(0, layout_.block("m").offset, nz, nz).setIdentity();
  const Index oC = layout_.block("C").offset;
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < nz; ++j) D(j, oC + r + j * rows) += mu(r);
  }
  return D;
}

std::string QpInstance::debug_string() const {
  std::ostringstream out;
  out << "ocp condensed\n";
  out << "horizon " << theta_.N << " nx " << theta_.nx << " nu " << theta_.nu << '\n';
  out << "pinned " << (pinned() ? "yes" : "no") << '\n';
  out << "variables " << theta_.nz() << '\n';
  out << "equalities " << num_equalities() << " (initial " << theta_.nx << ", pin " << num_pin_rows() << ")\n";
  out << "inequalities " << num_inequalities() << '\n';
  out << "nnz M " << nonzeros(theta_.M) << " C " << nonzeros(theta_.C) << '\n';
  describe_layout(out, layout_);
  return out.str();
}

QpInstance build_condensed_q(const ThetaCondensed& theta, const Vector& s, const Vector& a) {
  return QpInstance(theta, s, a);
}

QpInstance build_condensed_v(const ThetaCondensed& theta, const Vector& s) {
  return QpInstance(theta, s, std::nullopt);
}

// ---------------------------------------------------------------------------

ThetaCondensed condense_lti(const ThetaNonCondensed& theta, const Matrix& A, const Matrix& B, Index N, double gamma,
                            const Vector& u_lo, const Vector& u_hi, StateConstraints constraints) {
  theta.validate();
  const Index nx = A.rows();
  const Index nu = B.cols();
  require_dim(theta.nx(), nx, "theta state dimension");
  require_dim(theta.nu(), nu, "theta input dimension");
  require_dim(u_lo.size(), nu, "u_lo");
  require_dim(u_hi.size(), nu, "u_hi");
  if (constraints == StateConstraints::soft) {
    throw Error("condense_lti: slack-relaxed state constraints have no condensed counterpart");
  }
  const Index nz = nx + N * nu;

  // x_k = G[k] z + e[k].
  std::vector<Matrix> G(static_cast<std::size_t>(N + 1));
  std::vector<Vector> e(static_cast<std::size_t>(N + 1));
  G[0] = Matrix::Zero(nx, nz);
  G[0].leftCols(nx).setIdentity();
  e[0] = Vector::Zero(nx);
  for (Index k = 0; k < N; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    G[kk + 1] = A * G[kk];
    G[kk + 1].middleCols(nx + k * nu, nu) += B;
    e[kk + 1] = A * e[kk] + theta.c_f;
  }

  Matrix H = Matrix::Zero(nz, nz);
  Vector g = Vector::Zero(nz);
  double c = 0.0;
  auto add_quadratic = [&](const Matrix& W, const Vector& omega, const Matrix& Hq, const Vector& hq, double cq,
                           double scale) {
    const Matrix Hs = symmetric_part(Hq);
    H += scale * W.transpose() * Hs * W;
    g += scale * W.transpose() * (Hs * omega + hq);
    c += scale * (0.5 * omega.dot(Hs * omega) + hq.dot(omega) + cq);
  };

  add_quadratic(G[0], e[0], theta.H_lambda, theta.h_lambda, theta.c_lambda, 1.0);
  double w = 1.0;
  for (Index k = 0; k < N; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    Matrix W = Matrix::Zero(nx + nu, nz);
    W.topRows(nx) = G[kk];
    W.block(nx, nx + k * nu, nu, nu).setIdentity();
    Vector omega = Vector::Zero(nx + nu);
    omega.head(nx) = e[kk];
    add_quadratic(W, omega, theta.H_l, theta.h_l, theta.c_l, w);
    w *= gamma;
  }
  add_quadratic(G[static_cast<std::size_t>(N)], e[static_cast<std::size_t>(N)], theta.H_Vf, theta.h_Vf, theta.c_Vf,
                w);

  std::vector<Vector> rows;
  std::vector<double> rhs;
  if (constraints == StateConstraints::hard) {
    for (Index k = 0; k <= N; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      for (Index i = 0; i < nx; ++i) {
        if (std::isfinite(theta.x_lo(i))) {
          rows.push_back(-G[kk].row(i).transpose());
          rhs.push_back(e[kk](i) - theta.x_lo(i));
        }
      }
      for (Index i = 0; i < nx; ++i) {
        if (std::isfinite(theta.x_hi(i))) {
          rows.push_back(G[kk].row(i).transpose());
          rhs.push_back(theta.x_hi(i) - e[kk](i));
        }
      }
    }
  }
  for (Index k = 0; k < N; ++k) {
    for (Index i = 0; i < nu; ++i) {
      if (std::isfinite(u_hi(i))) {
        rows.push_back(Vector::Unit(nz, nx + k * nu + i));
        rhs.push_back(u_hi(i));
      }
      if (std::isfinite(u_lo(i))) {
        rows.push_back(-Vector::Unit(nz, nx + k * nu + i));
        rhs.push_back(-u_lo(i));
      }
    }
  }

  ThetaCondensed out;
  out.nx = nx;
  out.nu = nu;
  out.N = N;
  out.M = 0.5 * symmetric_part(H);
  out.m = g;
  out.c = c;
  const auto nc = static_cast<Index>(rows.size());
  out.C = Matrix::Zero(nc, nz);
  out.d = Vector::Zero(nc);
  for (Index r = 0; r < nc; ++r) {
    out.C.row(r) = rows[static_cast<std::size_t>(r)].transpose();
    out.d(r) = rhs[static_cast<std::size_t>(r)];
  }
  return out;
}

}  // namespace mpcrl::ocp
