#include "mpcrl/dense_qp.hpp"

#include <cmath>
#include <limits>

namespace mpcrl::solver {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Goldfarb-Idnani working data for min 0.5 y'Gy + c'y s.t. N' y + n0 >= 0.
class DualActiveSet {
 public:
  DualActiveSet(const Matrix& G, const Vector& c, const Matrix& N, const Vector& n0)
      : N_(N), n0_(n0), c_(c), n_(G.rows()), m_(N.cols()) {
    is_active_.assign(static_cast<std::size_t>(m_), false);
    col_norm_ = Vector::Ones(m_);
    if (n_ == 0) {
      convex_ = true;
      y_ = Vector::Zero(0);
      J_ = Matrix::Zero(0, 0);
      R_ = Matrix::Zero(0, 0);
      return;
    }
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) return;
    const Matrix L = llt.matrixL();
    const double dmax = L.diagonal().cwiseAbs().maxCoeff();
    const double dmin = L.diagonal().cwiseAbs().minCoeff();
    if (!(dmin > 1e-10 * dmax)) return;
    convex_ = true;
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n_, n_));
    R_ = Matrix::Zero(n_, n_);
    y_ = -(J_ * (J_.transpose() * c));
    active_.reserve(static_cast<std::size_t>(n_));
    mult_.reserve(static_cast<std::size_t>(n_));
    is_active_.assign(static_cast<std::size_t>(m_), false);
    col_norm_ = Vector::Ones(m_);
    for (Index i = 0; i < m_; ++i) {
      const double nrm = N_.col(i).norm();
      if (nrm > 0.0) col_norm_(i) = nrm;
    }
  }

  bool convex() const { return convex_; }

  /// Starts from the minimizer on a guessed working set: rows are added as
  /// equalities while linearly independent, then rows with negative
  /// multipliers are dropped until the point is dual feasible.
  void hot_start(const std::vector<Index>& guess) {
    for (const Index p : guess) {
      if (p < 0 || p >= m_ || is_active_[static_cast<std::size_t>(p)]) continue;
      if (static_cast<Index>(active_.size()) >= n_) break;
      Vector d = J_.transpose() * N_.col(p);
      const Index q = static_cast<Index>(active_.size());
      if (d.tail(n_ - q).norm() <= 1e-10 * col_norm_(p) * J_.cwiseAbs().maxCoeff()) continue;
      if (!add(d)) continue;
      active_.push_back(p);
      mult_.push_back(0.0);
      is_active_[static_cast<std::size_t>(p)] = true;
    }
    while (!active_.empty()) {
      const Vector Jc = J_.transpose() * c_;
      const Index q = static_cast<Index>(active_.size());
      Vector n0a(q);
      for (Index k = 0; k < q; ++k) n0a(k) = n0_(active_[static_cast<std::size_t>(k)]);
      const auto Rq = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>();
      const Vector w1 = -Rq.transpose().solve(n0a);
      const Vector lambda = Rq.solve(w1 + Jc.head(q));
      y_ = J_.leftCols(q) * w1 - J_.rightCols(n_ - q) * Jc.tail(n_ - q);
      Index worst = -1;
      for (Index k = 0; k < q; ++k) {
        mult_[static_cast<std::size_t>(k)] = lambda(k);
        if (lambda(k) < 0.0 && (worst < 0 || lambda(k) < lambda(worst))) worst = k;
      }
      if (worst < 0) return;
      drop(worst);
    }
    y_ = -(J_ * (J_.transpose() * c_));
  }

  QpStatus run(int max_iter, double feas_tol, int& iterations) {
    iterations = 0;
    const double n0_scale = m_ > 0 ? n0_.cwiseAbs().maxCoeff() : 0.0;
    while (true) {
      if (iterations >= max_iter) return QpStatus::max_iter;
      // Pick the most violated inactive row (normalized); ties go to the
      // lowest index.
      const Vector s = N_.transpose() * y_ + n0_;
      if (m_ == 0) return QpStatus::optimal;
      const double y_scale = n_ > 0 ? y_.cwiseAbs().maxCoeff() : 0.0;
      const double tol = feas_tol * (1.0 + n0_scale + y_scale * col_norm_.maxCoeff());
      Index p = -1;
      double worst = 0.0;
      for (Index i = 0; i < m_; ++i) {
        if (is_active_[static_cast<std::size_t>(i)]) continue;
        if (s(i) >= -tol) continue;
        const double v = s(i) / col_norm_(i);
        if (p < 0 || v < worst) {
          p = i;
          worst = v;
        }
      }
      if (p < 0) return QpStatus::optimal;

      const Vector np = N_.col(p);
      double u_plus = 0.0;
      while (true) {
        ++iterations;
        if (iterations > max_iter) return QpStatus::max_iter;
        const Index q = static_cast<Index>(active_.size());
        Vector d = J_.transpose() * np;
        Vector z = J_.rightCols(n_ - q) * d.tail(n_ - q);
        Vector r(q);
        if (q > 0) r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

        double t1 = kInf;
        Index l = -1;
        for (Index k = 0; k < q; ++k) {
          if (r(k) > 0.0) {
            const double ratio = mult_[static_cast<std::size_t>(k)] / r(k);
            if (ratio < t1) {
              t1 = ratio;
              l = k;
            }
          }
        }
        double t2 = kInf;
        const double zn = z.dot(np);
        if (z.squaredNorm() > kEps * kEps && zn > 0.0) {
          const double sp = np.dot(y_) + n0_(p);
          t2 = -sp / zn;
        }
        const double t = std::min(t1, t2);
        if (t == kInf) return QpStatus::infeasible;

        if (t2 == kInf) {
          for (Index k = 0; k < q; ++k) mult_[static_cast<std::size_t>(k)] -= t * r(k);
          u_plus += t;
          drop(l);
          continue;
        }
        y_ += t * z;
        for (Index k = 0; k < q; ++k) mult_[static_cast<std::size_t>(k)] -= t * r(k);
        u_plus += t;
        if (t == t2) {
          if (!add(d)) return QpStatus::infeasible;
          active_.push_back(p);
          mult_.push_back(u_plus);
          is_active_[static_cast<std::size_t>(p)] = true;
          break;
        }
        drop(l);
      }
    }
  }

  const Vector& y() const { return y_; }
  const std::vector<Index>& active() const { return active_; }
  const std::vector<double>& multipliers() const { return mult_; }

 private:
  // Givens rotations reduce d(q+1..n-1) to zero; R gains column q.
  bool add(Vector& d) {
    const Index q = static_cast<Index>(active_.size());
    for (Index j = n_ - 1; j > q; --j) {
      double cc = d(j - 1);
      double ss = d(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = 0; k < n_; ++k) {
        const double a = J_(k, j - 1);
        const double b = J_(k, j);
        J_(k, j - 1) = a * cc + b * ss;
        J_(k, j) = xny * (a + J_(k, j - 1)) - b;
      }
    }
    R_.col(q).head(q + 1) = d.head(q + 1);
    if (std::abs(d(q)) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d(q)));
    return true;
  }

  void drop(Index l) {
    const Index q = static_cast<Index>(active_.size());
    is_active_[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = false;
    active_.erase(active_.begin() + l);
    mult_.erase(mult_.begin() + l);
    for (Index j = l; j < q - 1; ++j) R_.col(j) = R_.col(j + 1);
    R_.col(q - 1).setZero();
    const Index qn = q - 1;
    for (Index j = l; j < qn; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = j + 1; k < qn; ++k) {
        const double a = R_(j, k);
        const double b = R_(j + 1, k);
        R_(j, k) = a * cc + b * ss;
        R_(j + 1, k) = xny * (a + R_(j, k)) - b;
      }
      for (Index k = 0; k < n_; ++k) {
        const double a = J_(k, j);
        const double b = J_(k, j + 1);
        J_(k, j) = a * cc + b * ss;
        J_(k, j + 1) = xny * (J_(k, j) + a) - b;
      }
    }
  }

  const Matrix& N_;
  const Vector& n0_;
  const Vector& c_;
  Index n_;
  Index m_;
  bool convex_ = false;
  Matrix J_;
  Matrix R_;
  Vector y_;
  Vector col_norm_;
  double r_norm_ = 1.0;
  std::vector<Index> active_;
  std::vector<double> mult_;
  std::vector<bool> is_active_;
};

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::nonconvex: return "nonconvex";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

QpResult solve_qp(const QpProblem& qp, const QpSettings& settings, const std::vector<Index>* active_guess) {
  const Index n = qp.H.rows();
  const Index m_eq = qp.A_eq.rows();
  const Index m_in = qp.A_in.rows();
  require_dim(qp.H.cols(), n, "QP Hessian");
  require_dim(qp.g.size(), n, "QP gradient");
  require_dim(qp.b_eq.size(), m_eq, "QP equality rhs");
  require_dim(qp.b_in.size(), m_in, "QP inequality rhs");
  if (m_eq > 0) require_dim(qp.A_eq.cols(), n, "QP equality matrix");
  if (m_in > 0) require_dim(qp.A_in.cols(), n, "QP inequality matrix");
  const Matrix A_in = m_in > 0 ? qp.A_in : Matrix::Zero(0, n);

  QpResult res;
  res.y_eq = Vector::Zero(m_eq);
  res.y_in = Vector::Zero(m_in);

  // Split variables into those touched by equalities and free ones.
  std::vector<Index> coupled;
  std::vector<Index> free_vars;
  for (Index j = 0; j < n; ++j) {
    if (m_eq > 0 && qp.A_eq.col(j).cwiseAbs().maxCoeff() > 0.0) {
      coupled.push_back(j);
    } else {
      free_vars.push_back(j);
    }
  }
  const Index nc = static_cast<Index>(coupled.size());
  const Index nf = static_cast<Index>(free_vars.size());
  if (m_eq > nc) throw DimensionError("QP has more equality rows than coupled variables");

  Matrix Ac(m_eq, nc);
  for (Index j = 0; j < nc; ++j) Ac.col(j) = qp.A_eq.col(coupled[static_cast<std::size_t>(j)]);

  Matrix Q1, Q2, R1;
  Vector xp = Vector::Zero(n);
  if (m_eq > 0) {
    Eigen::HouseholderQR<Matrix> qr(Ac.transpose());
    const Matrix Q = qr.householderQ() * Matrix::Identity(nc, nc);
    R1 = qr.matrixQR().topLeftCorner(m_eq, m_eq).triangularView<Eigen::Upper>();
    const double rmax = R1.diagonal().cwiseAbs().maxCoeff();
    if (!(R1.diagonal().cwiseAbs().minCoeff() > 1e-12 * rmax)) {
      throw DimensionError("QP equality constraints are linearly dependent");
    }
    Q1 = Q.leftCols(m_eq);
    Q2 = Q.rightCols(nc - m_eq);
    const Vector w = R1.transpose().triangularView<Eigen::Lower>().solve(qp.b_eq);
    const Vector xc = Q1 * w;
    for (Index j = 0; j < nc; ++j) xp(coupled[static_cast<std::size_t>(j)]) = xc(j);
  }

  const Index nr = (nc - m_eq) + nf;
  Matrix Z = Matrix::Zero(n, nr);
  for (Index j = 0; j < nc; ++j) {
    if (nc - m_eq > 0) Z.row(coupled[static_cast<std::size_t>(j)]).head(nc - m_eq) = Q2.row(j);
  }
  for (Index j = 0; j < nf; ++j) Z(free_vars[static_cast<std::size_t>(j)], (nc - m_eq) + j) = 1.0;

  Vector x = xp;
  if (nr == 0) {
    const Vector viol = A_in * x - qp.b_in;
    const double scale = 1.0 + (m_in > 0 ? qp.b_in.cwiseAbs().maxCoeff() : 0.0);
    if (m_in > 0 && viol.maxCoeff() > 1e-10 * scale) {
      res.status = QpStatus::infeasible;
      res.x = x;
      return res;
    }
    res.status = QpStatus::optimal;
  } else {
    const Matrix HZ = qp.H * Z;
    Matrix G = Z.transpose() * HZ;
    G = symmetric_part(G);
    const Vector c = Z.transpose() * (qp.H * xp + qp.g);
    const Matrix N = -(A_in * Z).transpose();
    const Vector n0 = qp.b_in - A_in * xp;

    DualActiveSet gi(G, c, N, n0);
    if (!gi.convex()) {
      res.status = QpStatus::nonconvex;
      res.x = x;
      return res;
    }
    if (active_guess != nullptr && !active_guess->empty()) gi.hot_start(*active_guess);
    res.status = gi.run(settings.max_iter, settings.feas_tol, res.iterations);
    x = xp + Z * gi.y();
    const auto& act = gi.active();
    const auto& mult = gi.multipliers();
    for (std::size_t k = 0; k < act.size(); ++k) res.y_in(act[k]) = mult[k];
    res.active = act;
  }

  if (m_eq > 0) {
    const Vector r = qp.H * x + qp.g + A_in.transpose() * res.y_in;
    Vector rc(nc);
    for (Index j = 0; j < nc; ++j) rc(j) = -r(coupled[static_cast<std::size_t>(j)]);
    res.y_eq = R1.triangularView<Eigen::Upper>().solve(Q1.transpose() * rc);
  }
  res.x = x;
  res.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
  return res;
}

}  // namespace mpcrl::solver
