#include "mars/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace mars {

namespace {

using clock_t_ = std::chrono::steady_clock;

void check_caps(const PenalizedProblem& problem, const FullSolverOptions& opts,
                const char* who) {
  if (problem.factor.p() > opts.p_cap) {
    throw MemoryCapExceeded(std::string(who) + ": p exceeds the dense cap");
  }
}

void check_admm_params(double sigma, double pi_step, const char* who) {
  constexpr double kGolden = 1.6180339887498949;
  if (!(sigma > 0.0)) throw SolverError(std::string(who) + ": sigma must be positive");
  if (!(pi_step > 0.0 && pi_step < kGolden)) {
    throw SolverError(std::string(who) + ": pi must lie in (0, (1+sqrt(5))/2)");
  }
}

// dist^2(F, B_lambda): diagonal entries contribute F_ii^2, off-diagonal
// entries the excess beyond the box. Equals ||Prox_theta(F)||_F^2.
double dist_sq_full(const Mat& f, double lambda) {
  double s = 0.0;
  for (Index j = 0; j < f.cols(); ++j) {
    for (Index i = 0; i < f.rows(); ++i) {
      const double v = f(i, j);
      const double r = (i == j) ? v : std::max(std::abs(v) - lambda, 0.0);
      s += r * r;
    }
  }
  return s;
}

// Mask of Prox_theta'(F): 0 iff off-diagonal and |F_ij| <= lambda.
Mat full_jacobian_mask(const Mat& f, double lambda) {
  Mat u(f.rows(), f.cols());
  for (Index j = 0; j < f.cols(); ++j) {
    for (Index i = 0; i < f.rows(); ++i) {
      u(i, j) = (i != j && std::abs(f(i, j)) <= lambda) ? 0.0 : 1.0;
    }
  }
  return u;
}

Mat start_point(const CovarianceFactor& factor, const FullSolverOptions& opts) {
  if (opts.omega0.rows() == factor.p() && opts.omega0.cols() == factor.p()) {
    return opts.omega0;
  }
  SparseSymMatrix diag = diagonal_solution(factor);
  return diag.to_dense();
}

// D -> D + sigma (S(D) o U) A on flat p*n vectors.
class FullNewtonOperator final : public LinearMap {
 public:
  FullNewtonOperator(const CovarianceFactor& factor, const Mat& u, double sigma)
      : factor_(factor), u_(u), sigma_(sigma) {}

  Index dim() const override { return factor_.p() * factor_.n(); }

  void apply(const Vec& v, Vec& out) const override {
    const Index p = factor_.p();
    const Index n = factor_.n();
    Eigen::Map<const RowMat> d(v.data(), p, n);
    Mat sd = big_S_apply(d, factor_);
    sd.array() *= u_.array();
    out.resize(p * n);
    Eigen::Map<RowMat>(out.data(), p, n) =
        d + sigma_ * RowMat(sd * Mat(factor_.A));
  }

 private:
  const CovarianceFactor& factor_;
  const Mat& u_;
  double sigma_;
};

// (I + sigma S* S)(Y) for the iADMM Y-subproblem, flat p*n vectors.
class AdmmYOperator final : public LinearMap {
 public:
  AdmmYOperator(const CovarianceFactor& factor, double sigma)
      : factor_(factor), sigma_(sigma) {}

  void set_sigma(double sigma) { sigma_ = sigma; }

  Index dim() const override { return factor_.p() * factor_.n(); }

  void apply(const Vec& v, Vec& out) const override {
    const Index p = factor_.p();
    const Index n = factor_.n();
    Eigen::Map<const RowMat> d(v.data(), p, n);
    Mat sd = big_S_apply(d, factor_);
    out.resize(p * n);
    Eigen::Map<RowMat>(out.data(), p, n) =
        d + sigma_ * RowMat(sd * Mat(factor_.A));
  }

 private:
  const CovarianceFactor& factor_;
  double sigma_;
};

struct FullSsnOut {
  RowMat Y;
  Mat pf;  // Prox_theta(F) at the accepted iterate
  double grad_norm = 0.0;
  int newton_iters = 0;
  int cg_iters = 0;
};

// Full-space analogue of the reduced semismooth Newton inner solver.
FullSsnOut full_ssn_solve(const Mat& omega, double sigma,
                          const CovarianceFactor& factor, double lambda,
                          const SsnConfig& cfg, double abs_tol,
                          double rel_factor, double tol_floor, RowMat y0) {
  const Index p = factor.p();
  const Index n = factor.n();
  FullSsnOut res;
  res.Y = (y0.rows() == p && y0.cols() == n) ? std::move(y0)
                                             : RowMat::Zero(p, n);

  Mat sy = big_S_apply(res.Y, factor);
  const double omega_sq = omega.squaredNorm();
  for (int j = 0; j <= cfg.max_newton; ++j) {
    Mat f = omega / sigma - sy;
    f.diagonal().array() += 1.0;
    res.pf = prox_theta(f, lambda);
    RowMat grad = res.Y - sigma * RowMat(res.pf * Mat(factor.A));
    res.grad_norm = grad.norm();
    const double primal_res = (omega / sigma - res.pf).norm();
    const double tol =
        std::max(tol_floor, std::min(abs_tol, rel_factor * primal_res));
    if (res.grad_norm <= tol) return res;
    if (j == cfg.max_newton) break;

    Mat u = full_jacobian_mask(f, lambda);
    FullNewtonOperator op(factor, u, sigma);
    const double cg_tol =
        std::min(cfg.eta_bar, std::pow(res.grad_norm, 1.0 + cfg.tau));
    Vec rhs(p * n);
    Eigen::Map<RowMat>(rhs.data(), p, n) = -grad;
    CgResult cg = conjugate_gradient(op, rhs, cg_tol, cfg.max_cg);
    res.cg_iters += cg.iters;
    RowMat dir = Eigen::Map<const RowMat>(cg.solution.data(), p, n);
    double slope = (grad.array() * dir.array()).sum();
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = -res.grad_norm * res.grad_norm;
    }

    const Mat sd = big_S_apply(dir, factor);
    const double y_sq = res.Y.squaredNorm();
    const double yd = (res.Y.array() * dir.array()).sum();
    const double d_sq = dir.squaredNorm();
    const double psi0 = 0.5 * y_sq - omega_sq / (2.0 * sigma) +
                        0.5 * sigma * dist_sq_full(f, lambda);
    double alpha = 1.0;
    for (int m = 0;; ++m) {
      if (m > 60) {
        throw LineSearchStalled("full_ssn_solve: Armijo did not terminate");
      }
      const double y_new_sq = y_sq + 2.0 * alpha * yd + alpha * alpha * d_sq;
      const double psi_new = 0.5 * y_new_sq - omega_sq / (2.0 * sigma) +
                             0.5 * sigma * dist_sq_full(f - alpha * sd, lambda);
      if (psi_new <= psi0 + cfg.mu * alpha * slope) break;
      alpha *= cfg.delta;
    }
    res.Y += alpha * dir;
    sy += alpha * sd;
    ++res.newton_iters;
  }
  return res;
}

}  // namespace

Mat big_S_apply(const RowMat& y, const CovarianceFactor& factor) {
  if (y.rows() != factor.p() || y.cols() != factor.n()) {
    throw DimensionMismatch("big_S_apply: Y must be p x n");
  }
  Mat yat = Mat(y) * Mat(factor.A).transpose();
  return 0.5 * (yat + yat.transpose());
}

FullSolveResult ssnal_solve(const PenalizedProblem& problem,
                            const SsnConfig& cfg, const StoppingPolicy& policy,
                            const FullSolverOptions& opts) {
  check_caps(problem, opts, "ssnal_solve");
  const CovarianceFactor& factor = problem.factor;
  const double lambda = problem.lambda;

  FullSolveResult res;
  res.omega = start_point(factor, opts);
  RowMat y = RowMat(res.omega * Mat(factor.A));

  double sigma = policy.sigma0;
  double eps_k = policy.eps0;
  double theta_k = policy.theta_prime0;

  res.eta = residual_info_dense(res.omega, factor, lambda).eta;
  for (int k = 0; k < policy.max_outer; ++k) {
    if (res.eta <= opts.tol) break;
    const auto t0 = clock_t_::now();
    const double abs_tol = std::sqrt(policy.tau_c / sigma) * eps_k;
    FullSsnOut inner =
        full_ssn_solve(res.omega, sigma, factor, lambda, cfg, abs_tol, theta_k,
                       policy.inner_tol_floor, std::move(y));
    y = std::move(inner.Y);
    // Omega - sigma (S(Y) + Z - I) = sigma Prox_theta(F): exact zeros.
    res.omega = sigma * inner.pf;
    res.eta = residual_info_dense(res.omega, factor, lambda).eta;
    res.iters = k + 1;
    FullTraceRow row;
    row.iter = k;
    row.sigma = sigma;
    row.inner_iters = inner.newton_iters;
    row.cg_iters = inner.cg_iters;
    row.grad_norm = inner.grad_norm;
    row.eta = res.eta;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(clock_t_::now() - t0).count();
    res.trace.push_back(row);
    if (res.eta <= opts.tol) break;
    sigma = std::min(sigma * policy.sigma_growth, policy.sigma_cap);
    eps_k *= policy.eps_ratio;
    theta_k *= policy.theta_ratio;
  }
  res.converged = res.eta <= opts.tol;
  return res;
}

FullSolveResult iadmm_solve(const PenalizedProblem& problem, double sigma,
                            double pi_step, const FullSolverOptions& opts) {
  check_caps(problem, opts, "iadmm_solve");
  check_admm_params(sigma, pi_step, "iadmm_solve");
  const CovarianceFactor& factor = problem.factor;
  const double lambda = problem.lambda;
  const Index p = factor.p();
  const Index n = factor.n();

  FullSolveResult res;
  res.omega = start_point(factor, opts);
  Mat z = Mat::Zero(p, p);
  RowMat y = RowMat(res.omega * Mat(factor.A));
  double sig = sigma;
  AdmmYOperator op(factor, sig);
  double prev_primal = std::numeric_limits<double>::infinity();
  double eta_checkpoint = std::numeric_limits<double>::infinity();

  res.eta = residual_info_dense(res.omega, factor, lambda).eta;
  for (int k = 0; k < opts.max_iter && res.eta > opts.tol; ++k) {
    const auto t0 = clock_t_::now();
    // the residual floor of the multiplier update scales like 1/sigma, so a
    // stagnating eta is cured by growing the penalty
    if (k % 300 == 0) {
      if (res.eta > 0.5 * eta_checkpoint && sig < 1e6) {
        sig = std::min(1e6, sig * 10.0);
        op.set_sigma(sig);
        prev_primal = std::numeric_limits<double>::infinity();
      }
      eta_checkpoint = res.eta;
    }
    Mat c = res.omega / sig - z;
    c.diagonal().array() += 1.0;
    // warm-started CG on (I + sigma S* S)(Y) = sigma C A
    Vec rhs(p * n);
    Eigen::Map<RowMat>(rhs.data(), p, n) = sig * RowMat(Mat(c) * Mat(factor.A));
    Vec y_flat(p * n);
    Eigen::Map<RowMat>(y_flat.data(), p, n) = y;
    Vec op_y;
    op.apply(y_flat, op_y);
    const double cg_tol = std::min(1e-2, 0.1 * prev_primal);
    CgResult cg = conjugate_gradient(op, rhs - op_y, cg_tol, 2000);
    y += Eigen::Map<const RowMat>(cg.solution.data(), p, n);

    Mat sy = big_S_apply(y, factor);
    Mat f = res.omega / sig - sy;
    f.diagonal().array() += 1.0;
    z = f - prox_theta(f, lambda);  // projection onto B_lambda
    Mat primal = res.omega / sig - prox_theta(f, lambda);
    prev_primal = primal.norm();
    res.omega -= pi_step * sig * primal;
    res.eta = residual_info_dense(res.omega, factor, lambda).eta;
    res.iters = k + 1;
    FullTraceRow row;
    row.iter = k;
    row.sigma = sig;
    row.cg_iters = cg.iters;
    row.grad_norm = prev_primal;
    row.eta = res.eta;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(clock_t_::now() - t0).count();
    res.trace.push_back(row);
  }
  res.converged = res.eta <= opts.tol;
  return res;
}

EadmmSpectral eadmm_precompute(const CovarianceFactor& factor, double sigma) {
  if (!(sigma > 0.0)) {
    throw SolverError("eadmm_precompute: sigma must be positive");
  }
  const Mat g = Mat(factor.A).transpose() * Mat(factor.A);  // n x n
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  const Vec& vals = eig.eigenvalues();
  Index m = 0;
  for (Index i = 0; i < vals.size(); ++i) {
    if (vals[i] > 1e-12) ++m;
  }
  EadmmSpectral sp;
  sp.tau = Vec(m);
  RowMat w(factor.n(), m);
  Index c = 0;
  for (Index i = 0; i < vals.size(); ++i) {
    if (vals[i] > 1e-12) {
      sp.tau[c] = vals[i];
      w.col(c) = eig.eigenvectors().col(i) / std::sqrt(vals[i]);
      ++c;
    }
  }
  sp.V_basis = RowMat(Mat(factor.A) * Mat(w));
  sp.Lambda1 = Vec(m);
  sp.Lambda2 = Mat(m, m);
  const double inv2 = 2.0 / sigma;
  for (Index i = 0; i < m; ++i) {
    sp.Lambda1[i] = sp.tau[i] / (sp.tau[i] + inv2);
    for (Index j = 0; j < m; ++j) {
      sp.Lambda2(i, j) =
          sp.tau[i] * sp.tau[j] * (sp.tau[i] + sp.tau[j] + 2.0 * inv2) /
          ((sp.tau[i] + inv2) * (sp.tau[j] + inv2) *
           (sp.tau[i] + sp.tau[j] + inv2));
    }
  }
  return sp;
}

FullSolveResult eadmm_solve(const PenalizedProblem& problem, double sigma,
                            double pi_step, const FullSolverOptions& opts) {
  check_caps(problem, opts, "eadmm_solve");
  check_admm_params(sigma, pi_step, "eadmm_solve");
  const CovarianceFactor& factor = problem.factor;
  const double lambda = problem.lambda;
  const Index p = factor.p();

  double sig = sigma;
  EadmmSpectral sp = eadmm_precompute(factor, sig);
  const Mat vb = Mat(sp.V_basis);

  FullSolveResult res;
  res.omega = start_point(factor, opts);
  Mat z = Mat::Zero(p, p);
  double eta_checkpoint = std::numeric_limits<double>::infinity();

  auto t_of = [&](const Mat& v) {
    Mat va = v * Mat(factor.A);
    Mat t = va * Mat(factor.A).transpose();
    return Mat(0.5 * (t + t.transpose()));
  };

  res.eta = residual_info_dense(res.omega, factor, lambda).eta;
  for (int k = 0; k < opts.max_iter && res.eta > opts.tol; ++k) {
    const auto t0 = clock_t_::now();
    // same stagnation cure as the inexact variant; the closed-form
    // coefficients depend on sigma, so they are refreshed on growth
    if (k % 300 == 0) {
      if (res.eta > 0.5 * eta_checkpoint && sig < 1e6) {
        sig = std::min(1e6, sig * 10.0);
        sp = eadmm_precompute(factor, sig);
      }
      eta_checkpoint = res.eta;
    }
    Mat c = res.omega / sig - z;
    c.diagonal().array() += 1.0;
    Mat cv = c * vb;                        // p x m
    Mat proj = cv * sp.Lambda1.asDiagonal() * vb.transpose();
    Mat core = sp.Lambda2.cwiseProduct(vb.transpose() * cv);
    Mat v = sig * (c - proj - proj.transpose() + vb * core * vb.transpose());

    Mat tv = t_of(v);
    if (k % 10 == 0) {
      const double vres = (v / sig + tv - c).norm() / (1.0 + c.norm());
      res.max_v_residual = std::max(res.max_v_residual, vres);
      if (vres > 1e-8) {
        throw BreakdownDetected("eadmm_solve: V-update identity violated");
      }
    }
    Mat f = res.omega / sig - tv;
    f.diagonal().array() += 1.0;
    z = f - prox_theta(f, lambda);
    Mat primal = res.omega / sig - prox_theta(f, lambda);
    res.omega -= pi_step * sig * primal;
    res.eta = residual_info_dense(res.omega, factor, lambda).eta;
    res.iters = k + 1;
    FullTraceRow row;
    row.iter = k;
    row.sigma = sig;
    row.grad_norm = primal.norm();
    row.eta = res.eta;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(clock_t_::now() - t0).count();
    res.trace.push_back(row);
  }
  res.converged = res.eta <= opts.tol;
  return res;
}

}  // namespace mars
