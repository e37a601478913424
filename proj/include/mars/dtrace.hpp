#pragma once

#include <functional>

#include "mars/pattern.hpp"

namespace mars {

// The p x n matrix A with A A^T = Sigma_hat; the only representation of
// the sample covariance that is ever materialized. Uses divisor n, so
// A = centered-data^T / sqrt(n) satisfies the identity exactly.
struct CovarianceFactor {
  RowMat A;

  Index p() const { return A.rows(); }
  Index n() const { return A.cols(); }

  double sigma(Index i, Index j) const { return A.row(i).dot(A.row(j)); }
  Vec sigma_diag() const { return A.rowwise().squaredNorm(); }
  Mat sigma_dense() const { return Mat(A) * Mat(A).transpose(); }
};

struct PenalizedProblem {
  CovarianceFactor factor;
  double lambda = 0.0;
};

// M = Omega * A for a pattern-supported Omega; cost O(t n).
RowMat sparse_times_factor(const SparseSymMatrix& omega_mat, const RowMat& a);

// h(Omega) = (Omega Sigma + Sigma Omega) / 2 - I, computed from M = Omega A
// as h = (M A^T + A M^T) / 2 - I.
Mat h_map(const SparseSymMatrix& omega_mat, const CovarianceFactor& factor);
Mat h_map_dense(const Mat& omega, const CovarianceFactor& factor);

// Streams row blocks h(Omega)[r0..r0+rows) without materializing p x p.
// The callback receives (r0, block) with block of size rows x p.
void h_blocks(const RowMat& m, const CovarianceFactor& factor, Index block_rows,
              const std::function<void(Index, const Mat&)>& fn);

// Soft-threshold of off-diagonal entries at lambda; identity on the diagonal.
Mat prox_theta(const Mat& m, double lambda);

// Projection onto B_lambda: diagonal zeroed, off-diagonals clipped.
Mat proj_Blambda(const Mat& m, double lambda);

struct ResidualInfo {
  double r_norm = 0.0;      // ||R_lambda(Omega)||_F
  double eta = 0.0;         // relative KKT residual
  double h_norm = 0.0;      // ||h(Omega)||_F
  double omega_norm = 0.0;  // ||Omega||_F
};

// ||R_lambda||_F and eta, streamed in row blocks of `block_rows`.
ResidualInfo residual_map(const SparseSymMatrix& omega_mat,
                          const CovarianceFactor& factor, double lambda,
                          Index block_rows = 256);

// eta for a dense estimate (used by the full-space baselines).
ResidualInfo residual_info_dense(const Mat& omega,
                                 const CovarianceFactor& factor,
                                 double lambda);

// Dense R_lambda(Omega) via the projection formula (small-p / test use).
Mat residual_matrix(const Mat& omega, const CovarianceFactor& factor,
                    double lambda);
// The same mapping via the Moreau form Omega - Prox_{lambda theta}(Omega - h).
Mat residual_matrix_prox(const Mat& omega, const CovarianceFactor& factor,
                         double lambda);

// max_{i<j} |Sigma_ij/Sigma_ii + Sigma_ij/Sigma_jj| / 2, streamed in row
// blocks. Throws DegenerateVariable if some Sigma_ii <= 1e-12.
double lambda_max(const CovarianceFactor& factor, Index block_rows = 256);

// Diagonal optimum 1/Sigma_ii, valid for every lambda >= lambda_max.
SparseSymMatrix diagonal_solution(const CovarianceFactor& factor);

// ||Omega A||_F^2 / 2 - tr(Omega) + lambda ||Omega||_{1,off}
double objective(const SparseSymMatrix& omega_mat,
                 const CovarianceFactor& factor, double lambda);
double objective_dense(const Mat& omega, const CovarianceFactor& factor,
                       double lambda);

}  // namespace mars
