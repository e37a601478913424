#pragma once

#include <vector>

#include "mars/reduction.hpp"

namespace mars {

// Semismooth Newton parameters; ranges checked on construction of solvers.
struct SsnConfig {
  double mu = 1e-4;       // Armijo slope fraction, in (0, 1/2)
  double eta_bar = 0.5;   // CG tolerance cap, in (0, 1)
  double tau = 0.2;       // convergence-order exponent, in (0, 1]
  double delta = 0.5;     // backtracking factor, in (0, 1)
  int max_newton = 50;
  int max_cg = 200;
};

// Outer-loop control: geometric summable sequences instantiate the
// inexactness criteria; tau_c = 1 because ||Y||^2/2 dominates psi.
struct StoppingPolicy {
  double eps0 = 0.5;          // eps_k = eps0 * eps_ratio^k
  double eps_ratio = 0.7;
  double theta_prime0 = 1.0;  // theta'_k = theta_prime0 * theta_ratio^k
  double theta_ratio = 0.7;
  double tau_c = 1.0;
  double outer_eta_tol = 1e-6;
  double inner_tol_floor = 1e-12;
  int max_outer = 100;
  double sigma0 = 1.0;
  double sigma_growth = 3.0;
  double sigma_cap = 1e6;
};

// Dual iterates, multiplier and penalty of the reduced ALM.
struct AlmState {
  RowMat Y;      // p x n
  Vec z;         // length t, in b_lambda after every outer step
  Vec x;         // length t multiplier
  double sigma = 1.0;
  int k = 0;
};

struct AlmTraceRow {
  int outer_iter = 0;
  double sigma = 0.0;
  int inner_iters = 0;
  int cg_iters = 0;
  double grad_norm = 0.0;
  double eta = 0.0;
  double wall_ms = 0.0;
};

// Reduced problem context shared by the inner and outer loops.
struct ReducedProblem {
  const CovarianceFactor* factor = nullptr;
  PatternPtr pattern;
  ReducedVectors rv;
  double lambda = 0.0;

  ReducedProblem() = default;
  ReducedProblem(const CovarianceFactor& f, PatternPtr pat, double lam)
      : factor(&f), pattern(std::move(pat)),
        rv(make_reduced_vectors(*pattern)), lambda(lam) {}
};

// psi(Y) = ||Y||^2/2 - ||x||^2/(2 sigma) + sigma/2 dist^2(f(Y), b_lambda)
// with f(Y) = x/sigma - S(Y) + e1. The overload taking a precomputed f
// avoids the O(t n) S(Y) pass during line searches.
double psi_value(const RowMat& y, const Vec& x, double sigma,
                 const ReducedProblem& prob);
double psi_value_from_f(double y_sq_norm, const Vec& f, const Vec& x,
                        double sigma, const ReducedProblem& prob);

// grad psi(Y) = Y - sigma S*(Prox_phi(f(Y))); Prox_phi is the identity on
// diagonal positions and the soft-threshold at lambda off-diagonal.
RowMat psi_gradient(const RowMat& y, const Vec& x, double sigma,
                    const ReducedProblem& prob);

// Componentwise prox / projection on the reduced space.
Vec prox_phi(const Vec& v, const ReducedProblem& prob);
Vec proj_b_lambda(const Vec& v, const ReducedProblem& prob);

// Generalized Jacobian mask: u_k = 0 iff off-diagonal and |f_k| <= lambda
// (ties at |f_k| = lambda drop the entry).
Vec jacobian_mask(const Vec& f, const ReducedProblem& prob);

// Self-adjoint PSD map D -> D + sigma S*(S(D) o u o e3) on flat p*n vectors.
class NewtonOperator final : public LinearMap {
 public:
  NewtonOperator(const ReducedProblem& prob, Vec u_mask, double sigma);
  Index dim() const override;
  void apply(const Vec& v, Vec& out) const override;

 private:
  const ReducedProblem& prob_;
  Vec weight_;  // u o e3, pre-multiplied
  double sigma_;
};

struct SsnResult {
  RowMat Y;
  Vec z;
  double grad_norm = 0.0;
  int newton_iters = 0;
  int total_cg_iters = 0;
  int unit_steps = 0;  // iterations accepted with m = 0
  bool max_newton_reached = false;
  std::vector<double> grad_norm_trace;
};

// Solves min_Y psi(Y) to ||grad psi|| <= max(floor, min(abs_tol,
// rel_factor * ||S(Y) + z - e1||)); z is re-projected every iteration.
SsnResult ssn_solve(const Vec& x, double sigma, const ReducedProblem& prob,
                    const SsnConfig& cfg, double abs_tol, double rel_factor,
                    double tol_floor, RowMat y0);

struct AlmResult {
  Vec x;
  RowMat Y;
  Vec z;
  SparseSymMatrix omega;
  double eta = 0.0;  // reduced-problem relative KKT residual
  int outer_iters = 0;
  int total_newton_iters = 0;
  int total_cg_iters = 0;
  bool max_outer_reached = false;
  std::vector<AlmTraceRow> trace;
};

// Inexact ALM on the reduced dual; stops when the reduced relative KKT
// residual of Omega = L^dagger(x o e3) reaches policy.outer_eta_tol.
AlmResult alm_solve(const PenalizedProblem& problem, PatternPtr pattern,
                    Vec x0, const StoppingPolicy& policy, const SsnConfig& cfg,
                    RowMat y0 = RowMat());

// Reduced-problem eta for a given x: residual restricted to the pattern with
// off-diagonal positions double-counted, matching the Frobenius norm of the
// symmetric matrices involved.
double reduced_eta(const Vec& x, const ReducedProblem& prob);

}  // namespace mars
