#include "mars/linalg.hpp"

#include <cmath>

namespace mars {

Mat cholesky(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("cholesky: matrix must be square");
  }
  const Index p = m.rows();
  Mat l = Mat::Zero(p, p);
  const double tiny = 1e-14 * std::max(1.0, m.diagonal().maxCoeff());
  for (Index j = 0; j < p; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tiny) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                " is not positive");
    }
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < p; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

CgResult conjugate_gradient(const LinearMap& op, const Vec& rhs, double tol,
                            int max_iter) {
  const Index n = op.dim();
  CgResult res;
  res.solution = Vec::Zero(n);
  Vec r = rhs;
  double rnorm = r.norm();
  if (rnorm <= tol) {
    res.residual_norm = rnorm;
    return res;
  }
  Vec p = r;
  Vec ap(n);
  double rs = rnorm * rnorm;
  const double breakdown_floor = -1e-12 * std::max(1.0, rhs.squaredNorm());
  for (int it = 0; it < max_iter; ++it) {
    op.apply(p, ap);
    const double curv = p.dot(ap);
    if (curv <= 0.0) {
      if (curv < breakdown_floor * p.squaredNorm()) {
        throw BreakdownDetected("conjugate_gradient: non-PSD operator");
      }
      break;  // round-off stagnation; return best iterate
    }
    const double alpha = rs / curv;
    res.solution += alpha * p;
    r -= alpha * ap;
    ++res.iters;
    const double rs_new = r.squaredNorm();
    rnorm = std::sqrt(rs_new);
    if (rnorm <= tol) {
      res.residual_norm = rnorm;
      return res;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  res.residual_norm = rnorm;
  res.max_iter_reached = true;
  return res;
}

namespace {

// Deterministic start vector so benchmark reports reproduce.
Vec power_start(Index n) {
  Vec v(n);
  std::uint64_t s = 0x9e3779b97f4a7c15ULL;
  for (Index i = 0; i < n; ++i) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    v[i] = 0.5 + static_cast<double>(s >> 11) * (0.5 / 9007199254740992.0);
  }
  return v / v.norm();
}

}  // namespace

double spectral_norm(const Mat& m, double tol) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Vec v = power_start(m.cols());
  double est = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Vec w = m.transpose() * (m * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    double next = std::sqrt(nw);
    if (it > 0 && std::abs(next - est) <= tol * std::max(1.0, next)) {
      return next;
    }
    est = next;
  }
  return est;
}

double spectral_norm(const LinearMap& op, double tol) {
  const Index n = op.dim();
  Vec v = power_start(n);
  Vec w(n);
  double est = 0.0;
  for (int it = 0; it < 5000; ++it) {
    op.apply(v, w);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(nw - est) <= tol * std::max(1.0, nw)) {
      return nw;
    }
    est = nw;
  }
  return est;
}

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f,
                         const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace mars
