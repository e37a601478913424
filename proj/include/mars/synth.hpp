#pragma once

#include <optional>
#include <string>

#include "mars/dtrace.hpp"

namespace mars {

// The five synthetic precision-matrix families used throughout the benchmarks
// (1-based index rules; see build_theta).
struct ModelSpec {
  int model_id = 1;  // 1..5
  Index p = 0;
  Index n = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Mat X;  // n x p, rows are samples
  bool standardized = false;
  std::optional<Mat> truth;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

// Exact model matrices:
//   1: banded, 0.2 at 1 <= |i-j| <= 2, unit diagonal
//   2: banded, 0.2 at 1 <= |i-j| <= 4, unit diagonal
//   3: block-diagonal of 5x5 blocks with 0.2 off-diagonal (p % 5 == 0)
//   4: Theta_ij = 0.2^|i-j|
//   5: grid-like, 0.2 at j = i+1 unless i is a multiple of sqrt(p), and at
//      j = i + sqrt(p) (1-based; p must be a perfect square)
Mat build_theta(const ModelSpec& spec);

// Rows i.i.d. N(0, Theta^{-1}), drawn by solving L^T x = z with Theta = L L^T
// (the inverse is never formed). Box-Muller normals on mt19937_64, so the
// stream is identical across platforms for a fixed seed.
Dataset sample_gaussian(const Mat& theta, Index n, std::uint64_t seed);

// Convenience: build_theta + sample_gaussian, keeping the truth.
Dataset generate(const ModelSpec& spec);

// In-place: mean 0, population (divisor-n) standard deviation 1 per column.
// Throws DegenerateVariable on a constant column.
void standardize(Dataset& data);

// A = X_centered^T / sqrt(n), so A A^T equals the divisor-n sample covariance.
CovarianceFactor make_factor(const Dataset& data);

// Rectangular numeric CSV, rows = samples. NaN/inf cells are rejected;
// errors name the offending 1-based row and column.
Dataset load_csv(const std::string& path, bool has_header);

void save_csv(const std::string& path, const Mat& x,
              const std::string& header_comment = "");

}  // namespace mars
