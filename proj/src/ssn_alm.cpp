#include "mars/ssn_alm.hpp"

#include <chrono>
#include <cmath>

namespace mars {

namespace {

void check_config(const SsnConfig& cfg) {
  if (!(cfg.mu > 0.0 && cfg.mu < 0.5) || !(cfg.eta_bar > 0.0 && cfg.eta_bar < 1.0) ||
      !(cfg.tau > 0.0 && cfg.tau <= 1.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw SolverError("SsnConfig: parameter out of range");
  }
}

double dist_sq_b_lambda(const Vec& f, const ReducedProblem& prob) {
  double s = 0.0;
  for (Index k = 0; k < f.size(); ++k) {
    if (prob.rv.e1[k] != 0.0) {
      s += f[k] * f[k];
    } else {
      const double ex = std::max(std::abs(f[k]) - prob.lambda, 0.0);
      s += ex * ex;
    }
  }
  return s;
}

}  // namespace

Vec prox_phi(const Vec& v, const ReducedProblem& prob) {
  Vec out(v.size());
  for (Index k = 0; k < v.size(); ++k) {
    if (prob.rv.e1[k] != 0.0) {
      out[k] = v[k];
    } else {
      out[k] = std::copysign(std::max(std::abs(v[k]) - prob.lambda, 0.0), v[k]);
    }
  }
  return out;
}

Vec proj_b_lambda(const Vec& v, const ReducedProblem& prob) {
  Vec out(v.size());
  for (Index k = 0; k < v.size(); ++k) {
    out[k] = (prob.rv.e1[k] != 0.0)
                 ? 0.0
                 : std::clamp(v[k], -prob.lambda, prob.lambda);
  }
  return out;
}

Vec jacobian_mask(const Vec& f, const ReducedProblem& prob) {
  Vec u(f.size());
  for (Index k = 0; k < f.size(); ++k) {
    u[k] = (prob.rv.e1[k] == 0.0 && std::abs(f[k]) <= prob.lambda) ? 0.0 : 1.0;
  }
  return u;
}

double psi_value_from_f(double y_sq_norm, const Vec& f, const Vec& x,
                        double sigma, const ReducedProblem& prob) {
  return 0.5 * y_sq_norm - x.squaredNorm() / (2.0 * sigma) +
         0.5 * sigma * dist_sq_b_lambda(f, prob);
}

double psi_value(const RowMat& y, const Vec& x, double sigma,
                 const ReducedProblem& prob) {
  Vec f = x / sigma - S_apply(y, *prob.factor, *prob.pattern) + prob.rv.e1;
  return psi_value_from_f(y.squaredNorm(), f, x, sigma, prob);
}

RowMat psi_gradient(const RowMat& y, const Vec& x, double sigma,
                    const ReducedProblem& prob) {
  Vec f = x / sigma - S_apply(y, *prob.factor, *prob.pattern) + prob.rv.e1;
  return y - sigma * S_star(prox_phi(f, prob), *prob.factor, *prob.pattern,
                            prob.rv.e3);
}

NewtonOperator::NewtonOperator(const ReducedProblem& prob, Vec u_mask,
                               double sigma)
    : prob_(prob), weight_(std::move(u_mask)), sigma_(sigma) {}

Index NewtonOperator::dim() const {
  return prob_.factor->p() * prob_.factor->n();
}

void NewtonOperator::apply(const Vec& v, Vec& out) const {
  const Index p = prob_.factor->p();
  const Index n = prob_.factor->n();
  Eigen::Map<const RowMat> d(v.data(), p, n);
  Vec s = S_apply(d, *prob_.factor, *prob_.pattern);
  s.array() *= weight_.array();
  RowMat sd = S_star(s, *prob_.factor, *prob_.pattern, prob_.rv.e3);
  out.resize(p * n);
  Eigen::Map<RowMat>(out.data(), p, n) = d + sigma_ * sd;
}

SsnResult ssn_solve(const Vec& x, double sigma, const ReducedProblem& prob,
                    const SsnConfig& cfg, double abs_tol, double rel_factor,
                    double tol_floor, RowMat y0) {
  check_config(cfg);
  const Index p = prob.factor->p();
  const Index n = prob.factor->n();
  SsnResult res;
  res.Y = (y0.size() == p * n) ? std::move(y0) : RowMat::Zero(p, n);

  Vec sy = S_apply(res.Y, *prob.factor, *prob.pattern);
  for (int j = 0; j <= cfg.max_newton; ++j) {
    Vec f = x / sigma - sy + prob.rv.e1;
    Vec pf = prox_phi(f, prob);
    res.z = f - pf;  // projection onto b_lambda
    RowMat grad = res.Y - sigma * S_star(pf, *prob.factor, *prob.pattern,
                                         prob.rv.e3);
    res.grad_norm = grad.norm();
    res.grad_norm_trace.push_back(res.grad_norm);
    // primal residual of (D): S(Y) + z - e1 = x/sigma - pf
    const double primal_res = (x / sigma - pf).norm();
    const double tol =
        std::max(tol_floor, std::min(abs_tol, rel_factor * primal_res));
    if (res.grad_norm <= tol) return res;
    if (j == cfg.max_newton) break;

    Vec u = jacobian_mask(f, prob);
    NewtonOperator op(prob, u, sigma);
    const double cg_tol =
        std::min(cfg.eta_bar, std::pow(res.grad_norm, 1.0 + cfg.tau));
    Vec rhs(p * n);
    Eigen::Map<RowMat>(rhs.data(), p, n) = -grad;
    CgResult cg = conjugate_gradient(op, rhs, cg_tol, cfg.max_cg);
    res.total_cg_iters += cg.iters;
    RowMat dir = Eigen::Map<const RowMat>(cg.solution.data(), p, n);
    double slope = (grad.array() * dir.array()).sum();
    if (!(slope < 0.0)) {
      dir = -grad;  // inexact CG lost descent to round-off
      slope = -res.grad_norm * res.grad_norm;
    }

    const Vec sd = S_apply(dir, *prob.factor, *prob.pattern);
    const double y_sq = res.Y.squaredNorm();
    const double yd = (res.Y.array() * dir.array()).sum();
    const double d_sq = dir.squaredNorm();
    const double psi0 = psi_value_from_f(y_sq, f, x, sigma, prob);
    double alpha = 1.0;
    int m = 0;
    for (;; ++m) {
      if (m > 60) {
        throw LineSearchStalled("ssn_solve: Armijo did not terminate");
      }
      const double y_new_sq = y_sq + 2.0 * alpha * yd + alpha * alpha * d_sq;
      Vec f_new = f - alpha * sd;
      const double psi_new = psi_value_from_f(y_new_sq, f_new, x, sigma, prob);
      if (psi_new <= psi0 + cfg.mu * alpha * slope) break;
      alpha *= cfg.delta;
    }
    if (m == 0) ++res.unit_steps;
    res.Y += alpha * dir;
    sy += alpha * sd;
    ++res.newton_iters;
  }
  res.max_newton_reached = true;
  return res;
}

double reduced_eta(const Vec& x, const ReducedProblem& prob) {
  const Vec omega = x.cwiseProduct(prob.rv.e3);
  SparseSymMatrix om(prob.pattern, omega);
  RowMat m = sparse_times_factor(om, prob.factor->A);
  Vec hv = S_apply(m, *prob.factor, *prob.pattern) - prob.rv.e1;
  double r2 = 0.0, h2 = 0.0;
  for (Index k = 0; k < hv.size(); ++k) {
    const double w = prob.rv.e4[k] > 1.5 ? 2.0 : 1.0;
    double r;
    if (prob.rv.e1[k] != 0.0) {
      r = hv[k];
    } else {
      const double g = omega[k] - hv[k];
      r = omega[k] - std::copysign(std::max(std::abs(g) - prob.lambda, 0.0), g);
    }
    r2 += w * r * r;
    h2 += w * hv[k] * hv[k];
  }
  const double r_norm = std::sqrt(r2);
  const double h_norm = std::sqrt(h2);
  return r_norm / (1.0 + h_norm + om.frobenius_norm());
}

AlmResult alm_solve(const PenalizedProblem& problem, PatternPtr pattern,
                    Vec x0, const StoppingPolicy& policy, const SsnConfig& cfg,
                    RowMat y0) {
  using clock = std::chrono::steady_clock;
  ReducedProblem prob(problem.factor, std::move(pattern), problem.lambda);
  const Index t = prob.pattern->t();
  AlmResult res;
  res.x = (x0.size() == t) ? std::move(x0) : Vec::Zero(t);
  RowMat y = (y0.size() == problem.factor.p() * problem.factor.n())
                 ? std::move(y0)
                 : RowMat::Zero(problem.factor.p(), problem.factor.n());

  double sigma = policy.sigma0;
  double eps_k = policy.eps0;
  double theta_k = policy.theta_prime0;

  res.eta = reduced_eta(res.x, prob);
  for (int k = 0; k < policy.max_outer; ++k) {
    if (res.eta <= policy.outer_eta_tol) break;
    const auto t0 = clock::now();
    const double abs_tol = std::sqrt(policy.tau_c / sigma) * eps_k;
    SsnResult inner = ssn_solve(res.x, sigma, prob, cfg, abs_tol, theta_k,
                                policy.inner_tol_floor, std::move(y));
    y = std::move(inner.Y);
    res.z = inner.z;
    // multiplier step: x <- x - sigma (S(Y) + z - e1) = x - sigma (x/sigma - pf)
    Vec sy = S_apply(y, *prob.factor, *prob.pattern);
    Vec primal = sy + res.z - prob.rv.e1;
    res.x -= sigma * primal;
    res.eta = reduced_eta(res.x, prob);
    res.outer_iters = k + 1;
    res.total_newton_iters += inner.newton_iters;
    res.total_cg_iters += inner.total_cg_iters;
    AlmTraceRow row;
    row.outer_iter = k;
    row.sigma = sigma;
    row.inner_iters = inner.newton_iters;
    row.cg_iters = inner.total_cg_iters;
    row.grad_norm = inner.grad_norm;
    row.eta = res.eta;
    row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0)
                      .count();
    res.trace.push_back(row);
    if (res.eta <= policy.outer_eta_tol) break;
    sigma = std::min(sigma * policy.sigma_growth, policy.sigma_cap);
    eps_k *= policy.eps_ratio;
    theta_k *= policy.theta_ratio;
  }
  res.max_outer_reached = res.eta > policy.outer_eta_tol;
  res.Y = std::move(y);
  res.omega = x_to_omega(res.x, prob.pattern, prob.rv.e3);
  return res;
}

}  // namespace mars
