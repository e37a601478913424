#include <doctest.h>

#include "mars/linalg.hpp"
#include "oracles.hpp"

using namespace mars;

TEST_CASE("cholesky identity and hand-checkable 2x2") {
  CHECK(cholesky(Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3), 1e-14));

  Mat m(2, 2);
  m << 4, 2, 2, 5;
  Mat expect(2, 2);
  expect << 2, 0, 1, 2;
  CHECK(cholesky(m).isApprox(expect, 1e-14));
}

TEST_CASE("cholesky reconstructs a banded SPD matrix") {
  Mat theta = Mat::Identity(5, 5);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = i + 1; j < std::min<Index>(5, i + 3); ++j) {
      theta(i, j) = theta(j, i) = 0.2;
    }
  }
  const Mat l = cholesky(theta);
  CHECK((l * l.transpose() - theta).norm() <= 1e-12);
  CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
}

TEST_CASE("cholesky rejects indefinite input") {
  Mat m(2, 2);
  m << 1, 2, 2, 1;
  CHECK_THROWS_AS(cholesky(m), NotPositiveDefinite);
}

namespace {

class DenseMap final : public LinearMap {
 public:
  explicit DenseMap(Mat m) : m_(std::move(m)) {}
  Index dim() const override { return m_.rows(); }
  void apply(const Vec& v, Vec& out) const override { out = m_ * v; }

 private:
  Mat m_;
};

}  // namespace

TEST_CASE("conjugate gradient trivial systems") {
  Vec rhs(3);
  rhs << 1, 2, 4;

  CgResult id = conjugate_gradient(DenseMap(Mat::Identity(3, 3)), rhs, 1e-12, 10);
  CHECK(id.iters == 1);
  CHECK((id.solution - rhs).norm() <= 1e-12);

  Mat d = Vec(rhs).asDiagonal();
  CgResult diag = conjugate_gradient(DenseMap(d), rhs, 1e-12, 10);
  CHECK((diag.solution - Vec::Ones(3)).norm() <= 1e-10);
}

TEST_CASE("conjugate gradient matches a direct solve on random SPD") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    Mat b = oracle::random_mat(20, 20, rng);
    Mat spd = b * b.transpose() + 20.0 * Mat::Identity(20, 20);
    Vec rhs = oracle::random_vec(20, rng);
    CgResult cg = conjugate_gradient(DenseMap(spd), rhs, 1e-10, 200);
    Vec direct = spd.ldlt().solve(rhs);
    CHECK((cg.solution - direct).norm() <= 1e-8);
    CHECK(cg.residual_norm <= 1e-10);
  }
}

TEST_CASE("conjugate gradient flags breakdown on an indefinite operator") {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  Vec rhs(2);
  rhs << 0, 1;  // the first direction has strictly negative curvature
  CHECK_THROWS_AS(conjugate_gradient(DenseMap(m), rhs, 1e-10, 10),
                  BreakdownDetected);
}

TEST_CASE("spectral norm basics") {
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 3, 1, -5;
  CHECK(spectral_norm(d) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(spectral_norm(Mat::Zero(4, 4)) == 0.0);
}

TEST_CASE("spectral norm matches dense SVD on random matrices") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    Mat m = oracle::random_mat(10, 10, rng);
    Eigen::JacobiSVD<Mat> svd(m);
    CHECK(spectral_norm(m) ==
          doctest::Approx(svd.singularValues()[0]).epsilon(1e-6));
  }
}

TEST_CASE("finite differences on simple fields") {
  Vec x(2);
  x << 1, 2;
  Vec g = finite_diff_gradient([](const Vec& v) { return 0.5 * v.squaredNorm(); },
                               x, 1e-5);
  CHECK((g - x).norm() <= 1e-9);

  Vec c(2);
  c << -3, 7;
  Vec gl = finite_diff_gradient([&](const Vec& v) { return c.dot(v); }, x, 1e-5);
  CHECK((gl - c).norm() <= 1e-8);
}

TEST_CASE("linear map adjointness and PSD on random pairs") {
  std::mt19937_64 rng(13);
  Mat b = oracle::random_mat(8, 8, rng);
  DenseMap op(b * b.transpose());
  for (int rep = 0; rep < 100; ++rep) {
    Vec u = oracle::random_vec(8, rng);
    Vec v = oracle::random_vec(8, rng);
    Vec ou, ov;
    op.apply(u, ou);
    op.apply(v, ov);
    CHECK(std::abs(ou.dot(v) - u.dot(ov)) <= 1e-10 * (1.0 + ou.norm() * v.norm()));
    CHECK(ou.dot(u) >= -1e-10 * u.squaredNorm());
  }
}
