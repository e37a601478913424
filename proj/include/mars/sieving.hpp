#pragma once

#include <string>
#include <vector>

#include "mars/ssn_alm.hpp"

namespace mars {

struct PathSpec {
  std::vector<double> lambdas;  // strictly decreasing, positive
  double eps = 1e-4;            // relative KKT tolerance (eta)
  int max_sieve_rounds = 100;
  int sieve_cap = 0;  // max new positions per round; 0 = unlimited
  Index block_rows = 256;
};

struct PathEntry {
  double lambda = 0.0;
  double lambda_requested = 0.0;  // before clamping at lambda_max
  SparseSymMatrix estimate;
  double eta = 0.0;
  double objective = 0.0;
  Index s_off = 0;
  Index s_bar_off = 0;  // |value| > 1e-5
  int sieve_rounds = 0;
  int max_alm_outer = 0;
  double wall_ms = 0.0;
  bool converged = true;
  bool clamped = false;
};

struct PathResult {
  std::vector<PathEntry> entries;
  std::vector<std::string> notices;
};

// KKT-violation rule of the sieve: off-diagonal complement positions with
// |h(Omega)_ij| > lambda + band and diagonal complement positions with
// |h(Omega)_ii| > band, where band = eps_abs / sqrt(2 |I-bar|) and
// eps_abs = eps (1 + ||h||_F + ||Omega||_F). Sorted by |h| descending.
std::vector<SparsityPattern::Pair> sieve_expand(
    const SparseSymMatrix& omega_mat, const CovarianceFactor& factor,
    double lambda, double eps, int cap = 0, Index block_rows = 256);

// Algorithm driver: warm-started path over the lambda grid, expanding the
// active pattern until the full-problem eta passes at each lambda.
PathResult solve_path(const CovarianceFactor& factor, const PathSpec& spec,
                      const StoppingPolicy& policy = {},
                      const SsnConfig& cfg = {});

// One lambda, cold start from the diagonal solution.
PathEntry cold_solve(const CovarianceFactor& factor, double lambda, double eps,
                     const StoppingPolicy& policy = {},
                     const SsnConfig& cfg = {});

// Writes one coordinate file per lambda plus a path.csv summary.
void save_path(const std::string& dir, const PathResult& result,
               const std::string& header_comment = "");

}  // namespace mars
