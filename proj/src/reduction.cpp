#include "mars/reduction.hpp"

#include <cmath>

namespace mars {

Vec L_apply(const Mat& omega, const SparsityPattern& pattern) {
  if (omega.rows() != pattern.p() || omega.cols() != pattern.p()) {
    throw DimensionMismatch("L_apply: dimension mismatch");
  }
  Vec out(pattern.t());
  for (Index k = 0; k < pattern.t(); ++k) {
    auto [i, j] = pattern.kept()[k];
    out[k] = omega(i, j);
  }
  return out;
}

SparseSymMatrix L_dagger(const Vec& omega, PatternPtr pattern) {
  return SparseSymMatrix(std::move(pattern), omega);
}

SparseSymMatrix L_star(const Vec& v, PatternPtr pattern, const Vec& e3) {
  return SparseSymMatrix(std::move(pattern), v.cwiseProduct(e3));
}

Vec Ldagger_star(const Mat& v, const SparsityPattern& pattern, const Vec& e4) {
  return L_apply(v, pattern).cwiseProduct(e4);
}

Vec S_apply(const RowMat& y, const CovarianceFactor& factor,
            const SparsityPattern& pattern) {
  if (y.rows() != factor.p() || y.cols() != factor.n()) {
    throw DimensionMismatch("S_apply: dimension mismatch");
  }
  Vec out(pattern.t());
  const RowMat& a = factor.A;
  for (Index k = 0; k < pattern.t(); ++k) {
    auto [i, j] = pattern.kept()[k];
    out[k] = 0.5 * (y.row(i).dot(a.row(j)) + a.row(i).dot(y.row(j)));
  }
  return out;
}

RowMat S_star(const Vec& v, const CovarianceFactor& factor,
              const SparsityPattern& pattern, const Vec& e3) {
  RowMat out = RowMat::Zero(factor.p(), factor.n());
  const RowMat& a = factor.A;
  for (Index k = 0; k < pattern.t(); ++k) {
    auto [i, j] = pattern.kept()[k];
    const double w = v[k] * e3[k];
    if (w == 0.0) continue;
    out.row(i) += w * a.row(j);
    if (i != j) out.row(j) += w * a.row(i);
  }
  return out;
}

SparseSymMatrix x_to_omega(const Vec& x, PatternPtr pattern, const Vec& e3) {
  return SparseSymMatrix(std::move(pattern), x.cwiseProduct(e3));
}

Vec omega_to_x(const SparseSymMatrix& omega_mat, const Vec& e4) {
  return omega_mat.omega.cwiseProduct(e4);
}

double gamma_objective(const Vec& x, const CovarianceFactor& factor,
                       const SparsityPattern& pattern, const ReducedVectors& rv,
                       double lambda) {
  RowMat sx = S_star(x, factor, pattern, rv.e3);
  const double l1 = x.cwiseProduct(rv.e2).cwiseAbs().sum();
  return 0.5 * sx.squaredNorm() - x.dot(rv.e1) + 0.5 * lambda * l1;
}

}  // namespace mars
