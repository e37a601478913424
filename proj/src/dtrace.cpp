#include "mars/dtrace.hpp"

#include <cmath>

namespace mars {

RowMat sparse_times_factor(const SparseSymMatrix& omega_mat, const RowMat& a) {
  if (omega_mat.p() != a.rows()) {
    throw DimensionMismatch("sparse_times_factor: dimension mismatch");
  }
  RowMat m = RowMat::Zero(a.rows(), a.cols());
  const auto& kept = omega_mat.pattern->kept();
  for (Index k = 0; k < omega_mat.pattern->t(); ++k) {
    auto [i, j] = kept[k];
    const double w = omega_mat.omega[k];
    if (w == 0.0) continue;
    m.row(i) += w * a.row(j);
    if (i != j) m.row(j) += w * a.row(i);
  }
  return m;
}

Mat h_map(const SparseSymMatrix& omega_mat, const CovarianceFactor& factor) {
  RowMat m = sparse_times_factor(omega_mat, factor.A);
  Mat h = 0.5 * (Mat(m) * Mat(factor.A).transpose() +
                 Mat(factor.A) * Mat(m).transpose());
  h.diagonal().array() -= 1.0;
  return h;
}

Mat h_map_dense(const Mat& omega, const CovarianceFactor& factor) {
  Mat m = omega * Mat(factor.A);
  Mat h = 0.5 * (m * Mat(factor.A).transpose() +
                 Mat(factor.A) * m.transpose());
  h.diagonal().array() -= 1.0;
  return h;
}

void h_blocks(const RowMat& m, const CovarianceFactor& factor,
              Index block_rows, const std::function<void(Index, const Mat&)>& fn) {
  const Index p = factor.p();
  const Mat at = Mat(factor.A).transpose();  // n x p
  const Mat mt = Mat(m).transpose();         // n x p
  for (Index r0 = 0; r0 < p; r0 += block_rows) {
    const Index rows = std::min(block_rows, p - r0);
    Mat block = 0.5 * (Mat(m.middleRows(r0, rows)) * at +
                       Mat(factor.A.middleRows(r0, rows)) * mt);
    for (Index i = 0; i < rows; ++i) block(i, r0 + i) -= 1.0;
    fn(r0, block);
  }
}

Mat prox_theta(const Mat& m, double lambda) {
  Mat out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      out(i, j) = (i == j) ? v
                           : std::copysign(std::max(std::abs(v) - lambda, 0.0),
                                           v);
    }
  }
  return out;
}

Mat proj_Blambda(const Mat& m, double lambda) {
  Mat out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      out(i, j) = (i == j) ? 0.0 : std::clamp(m(i, j), -lambda, lambda);
    }
  }
  return out;
}

ResidualInfo residual_map(const SparseSymMatrix& omega_mat,
                          const CovarianceFactor& factor, double lambda,
                          Index block_rows) {
  RowMat m = sparse_times_factor(omega_mat, factor.A);
  double r2 = 0.0, h2 = 0.0;
  const auto& pattern = *omega_mat.pattern;
  h_blocks(m, factor, block_rows, [&](Index r0, const Mat& hb) {
    // Omega rows for this block, dense
    Mat ob = Mat::Zero(hb.rows(), hb.cols());
    for (Index k = 0; k < pattern.t(); ++k) {
      auto [i, j] = pattern.kept()[k];
      if (i >= r0 && i < r0 + hb.rows()) ob(i - r0, j) = omega_mat.omega[k];
      if (j >= r0 && j < r0 + hb.rows()) ob(j - r0, i) = omega_mat.omega[k];
    }
    for (Index c = 0; c < hb.cols(); ++c) {
      for (Index r = 0; r < hb.rows(); ++r) {
        const double h = hb(r, c);
        const double w = ob(r, c);
        const double g = w - h;
        double r_entry;
        if (r0 + r == c) {
          r_entry = h;  // diagonal prox is the identity
        } else {
          r_entry = w - std::copysign(std::max(std::abs(g) - lambda, 0.0), g);
        }
        r2 += r_entry * r_entry;
        h2 += h * h;
      }
    }
  });
  ResidualInfo info;
  info.r_norm = std::sqrt(r2);
  info.h_norm = std::sqrt(h2);
  info.omega_norm = omega_mat.frobenius_norm();
  info.eta = info.r_norm / (1.0 + info.h_norm + info.omega_norm);
  return info;
}

ResidualInfo residual_info_dense(const Mat& omega,
                                 const CovarianceFactor& factor,
                                 double lambda) {
  Mat h = h_map_dense(omega, factor);
  Mat r = omega - prox_theta(omega - h, lambda);
  ResidualInfo info;
  info.r_norm = r.norm();
  info.h_norm = h.norm();
  info.omega_norm = omega.norm();
  info.eta = info.r_norm / (1.0 + info.h_norm + info.omega_norm);
  return info;
}

Mat residual_matrix(const Mat& omega, const CovarianceFactor& factor,
                    double lambda) {
  Mat h = h_map_dense(omega, factor);
  return h + proj_Blambda(omega - h, lambda);
}

Mat residual_matrix_prox(const Mat& omega, const CovarianceFactor& factor,
                         double lambda) {
  Mat h = h_map_dense(omega, factor);
  return omega - prox_theta(omega - h, lambda);
}

double lambda_max(const CovarianceFactor& factor, Index block_rows) {
  const Vec d = factor.sigma_diag();
  if (d.minCoeff() <= 1e-12) {
    throw DegenerateVariable("lambda_max: a variable has zero variance");
  }
  const Index p = factor.p();
  const Mat at = Mat(factor.A).transpose();
  double best = 0.0;
  for (Index r0 = 0; r0 < p; r0 += block_rows) {
    const Index rows = std::min(block_rows, p - r0);
    Mat sig = Mat(factor.A.middleRows(r0, rows)) * at;  // rows x p
    for (Index r = 0; r < rows; ++r) {
      const Index i = r0 + r;
      for (Index j = i + 1; j < p; ++j) {
        const double v =
            0.5 * std::abs(sig(r, j) / d[i] + sig(r, j) / d[j]);
        if (v > best) best = v;
      }
    }
  }
  return best;
}

SparseSymMatrix diagonal_solution(const CovarianceFactor& factor) {
  const Vec d = factor.sigma_diag();
  if (d.minCoeff() <= 1e-12) {
    throw DegenerateVariable("diagonal_solution: a variable has zero variance");
  }
  auto pattern = std::make_shared<const SparsityPattern>(
      SparsityPattern::diagonal(factor.p()));
  return SparseSymMatrix(pattern, d.cwiseInverse());
}

double objective(const SparseSymMatrix& omega_mat,
                 const CovarianceFactor& factor, double lambda) {
  RowMat m = sparse_times_factor(omega_mat, factor.A);
  double l1_off = 0.0;
  for (Index k = 0; k < omega_mat.pattern->t(); ++k) {
    if (!omega_mat.pattern->is_diag(k)) {
      l1_off += 2.0 * std::abs(omega_mat.omega[k]);
    }
  }
  return 0.5 * m.squaredNorm() - omega_mat.trace() + lambda * l1_off;
}

double objective_dense(const Mat& omega, const CovarianceFactor& factor,
                       double lambda) {
  Mat m = omega * Mat(factor.A);
  double l1_off = omega.cwiseAbs().sum() - omega.diagonal().cwiseAbs().sum();
  return 0.5 * m.squaredNorm() - omega.trace() + lambda * l1_off;
}

}  // namespace mars
