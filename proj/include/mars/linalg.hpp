#pragma once

#include <Eigen/Dense>
#include <functional>

#include "mars/errors.hpp"

namespace mars {

// Dense symmetric / general p x p matrices are column-major Eigen matrices.
// The p x n factors and dual blocks (A, Y, D, M = Omega*A) are stored
// row-major so that the per-row dot products in the reduced operators walk
// contiguous memory.
using Mat = Eigen::MatrixXd;
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// Abstract self-adjoint action v -> Mv on flat real vectors, for the
// matrix-free CG used by the Newton solvers.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual Index dim() const = 0;
  virtual void apply(const Vec& v, Vec& out) const = 0;
};

// Wraps a callable as a LinearMap.
class FunctionMap final : public LinearMap {
 public:
  FunctionMap(Index dim, std::function<void(const Vec&, Vec&)> fn)
      : dim_(dim), fn_(std::move(fn)) {}
  Index dim() const override { return dim_; }
  void apply(const Vec& v, Vec& out) const override { fn_(v, out); }

 private:
  Index dim_;
  std::function<void(const Vec&, Vec&)> fn_;
};

// Lower-triangular L with L L^T = M. Throws NotPositiveDefinite when a
// pivot falls below a tiny threshold.
Mat cholesky(const Mat& m);

struct CgResult {
  Vec solution;
  int iters = 0;
  double residual_norm = 0.0;
  bool max_iter_reached = false;
};

// Hestenes-Stiefel CG with an absolute residual stop ||op(v) - rhs|| <= tol.
// Throws BreakdownDetected when the curvature term p^T A p is non-positive
// beyond round-off.
CgResult conjugate_gradient(const LinearMap& op, const Vec& rhs, double tol,
                            int max_iter);

// Largest singular value via power iteration on M^T M, deterministic start
// vector. Returns 0 for the zero matrix.
double spectral_norm(const Mat& m, double tol = 1e-10);

// Largest eigenvalue magnitude of a symmetric operator given matrix-free.
double spectral_norm(const LinearMap& op, double tol = 1e-10);

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h).
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f,
                         const Vec& x, double h);

}  // namespace mars
