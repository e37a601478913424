#pragma once

#include "mars/dtrace.hpp"

namespace mars {

// Reduced-space operators. Pattern order is row-major over the upper
// triangle; every length-t vector shares it.

// L(Omega): kept upper-triangle entries in pattern order.
Vec L_apply(const Mat& omega, const SparsityPattern& pattern);

// L^dagger(omega): symmetric matrix with zeros off-pattern.
SparseSymMatrix L_dagger(const Vec& omega, PatternPtr pattern);

// L*(v) = L^dagger(v o e3).
SparseSymMatrix L_star(const Vec& v, PatternPtr pattern, const Vec& e3);

// (L^dagger)*(V) = L(V) o e4.
Vec Ldagger_star(const Mat& v, const SparsityPattern& pattern, const Vec& e4);

// S(Y) = L(Y A^T + A Y^T) / 2, evaluated per kept position in O(t n).
Vec S_apply(const RowMat& y, const CovarianceFactor& factor,
            const SparsityPattern& pattern);

// S*(v) = L*(v) A, sparse-times-dense in O(t n).
RowMat S_star(const Vec& v, const CovarianceFactor& factor,
              const SparsityPattern& pattern, const Vec& e3);

// Omega = L^dagger(x o e3): the primal estimate carried by the multiplier.
SparseSymMatrix x_to_omega(const Vec& x, PatternPtr pattern, const Vec& e3);
Vec omega_to_x(const SparseSymMatrix& omega_mat, const Vec& e4);

// Gamma(x) = ||S*(x)||_F^2 / 2 - <x, e1> + lambda/2 ||x o e2||_1
double gamma_objective(const Vec& x, const CovarianceFactor& factor,
                       const SparsityPattern& pattern, const ReducedVectors& rv,
                       double lambda);

}  // namespace mars
