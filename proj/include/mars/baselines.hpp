#pragma once

#include <vector>

#include "mars/ssn_alm.hpp"

namespace mars {

// Full-space comparison solvers. They carry dense p x p state, so each one
// refuses to run above a configurable dimension cap.

// S(Y) = (Y A^T + A Y^T) / 2 as a dense symmetric matrix.
Mat big_S_apply(const RowMat& y, const CovarianceFactor& factor);

struct FullTraceRow {
  int iter = 0;
  double sigma = 0.0;
  int inner_iters = 0;
  int cg_iters = 0;
  double grad_norm = 0.0;
  double eta = 0.0;
  double wall_ms = 0.0;
};

struct FullSolveResult {
  Mat omega;
  double eta = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<FullTraceRow> trace;
  double max_v_residual = 0.0;  // eADMM V-update identity violation
};

struct FullSolverOptions {
  double tol = 1e-4;      // relative KKT residual target
  Index p_cap = 8000;
  int max_iter = 20000;   // ADMM iteration cap
  Mat omega0;             // optional warm start; empty = diagonal solution
};

// Augmented Lagrangian on the full dual with a semismooth Newton inner
// solver; no sieving.
FullSolveResult ssnal_solve(const PenalizedProblem& problem,
                            const SsnConfig& cfg = {},
                            const StoppingPolicy& policy = {},
                            const FullSolverOptions& opts = {});

// ADMM whose Y-subproblem (I + sigma S* S) Y = sigma C A is solved by CG.
FullSolveResult iadmm_solve(const PenalizedProblem& problem, double sigma,
                            double pi_step, const FullSolverOptions& opts = {});

// Spectral data for the exact-ADMM V-update closed form.
struct EadmmSpectral {
  RowMat V_basis;  // p x m orthonormal columns
  Vec tau;         // m positive eigenvalues of Sigma_hat
  Vec Lambda1;     // m
  Mat Lambda2;     // m x m
};

EadmmSpectral eadmm_precompute(const CovarianceFactor& factor, double sigma);

// ADMM whose V-subproblem is solved in closed form from the thin spectral
// decomposition of Sigma_hat.
FullSolveResult eadmm_solve(const PenalizedProblem& problem, double sigma,
                            double pi_step, const FullSolverOptions& opts = {});

}  // namespace mars
