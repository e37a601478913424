#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mars/evalkit.hpp"
#include "oracles.hpp"

using namespace mars;

namespace {

// independently coded reference metrics
Metrics naive_metrics(const Mat& est, const Mat& truth, double small) {
  Metrics m;
  Mat diff = est - truth;
  m.frobenius = diff.norm();
  m.spectral = diff.jacobiSvd().singularValues()[0];
  m.infinity = diff.cwiseAbs().rowwise().sum().maxCoeff();
  const Index p = truth.rows();
  Index true_nz = 0, true_z = 0, hit_nz = 0, hit_z = 0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      if (est(i, j) != 0.0) ++m.s_off;
      if (std::abs(est(i, j)) > small) ++m.s_bar_off;
      if (truth(i, j) != 0.0) {
        ++true_nz;
        if (est(i, j) != 0.0) ++hit_nz;
      } else {
        ++true_z;
        if (est(i, j) == 0.0) ++hit_z;
      }
    }
  }
  m.tp = true_nz == 0 ? 1.0 : double(hit_nz) / true_nz;
  m.tn = true_z == 0 ? 1.0 : double(hit_z) / true_z;
  return m;
}

}  // namespace

TEST_CASE("metrics at the truth and at zero") {
  Mat theta = build_theta({1, 6, 1, 0});
  Metrics exact = compute_metrics(theta, theta);
  CHECK(exact.frobenius == 0.0);
  CHECK(exact.spectral == 0.0);
  CHECK(exact.infinity == 0.0);
  CHECK(exact.tp == 1.0);
  CHECK(exact.tn == 1.0);

  Metrics zero = compute_metrics(Mat(Mat::Zero(6, 6)), theta);
  CHECK(zero.tp == 0.0);
  CHECK(zero.tn == 1.0);
  CHECK(zero.frobenius == doctest::Approx(theta.norm()).epsilon(1e-14));
  CHECK(zero.s_off == 0);
}

TEST_CASE("metrics match an independent implementation on random inputs") {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> coin(0, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const Index p = 5 + rep % 4;
    Mat truth = oracle::random_sym(p, rng);
    Mat est = oracle::random_sym(p, rng);
    // sprinkle structural zeros on both sides
    for (Index i = 0; i < p; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        if (coin(rng) == 0) truth(i, j) = truth(j, i) = 0.0;
        if (coin(rng) == 0) est(i, j) = est(j, i) = 0.0;
      }
    }
    Metrics got = compute_metrics(est, truth, 0.5);
    Metrics want = naive_metrics(est, truth, 0.5);
    CHECK(got.frobenius == doctest::Approx(want.frobenius).epsilon(1e-12));
    CHECK(got.spectral == doctest::Approx(want.spectral).epsilon(1e-8));
    CHECK(got.infinity == doctest::Approx(want.infinity).epsilon(1e-12));
    CHECK(got.tp == want.tp);
    CHECK(got.tn == want.tn);
    CHECK(got.s_off == want.s_off);
    CHECK(got.s_bar_off == want.s_bar_off);
  }
}

TEST_CASE("metrics are permutation equivariant") {
  std::mt19937_64 rng(82);
  const Index p = 7;
  Mat truth = build_theta({1, p, 1, 0});
  Mat est = oracle::random_sym(p, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(p);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + p, rng);
  Metrics a = compute_metrics(est, truth);
  Metrics b = compute_metrics(Mat(perm * est * perm.transpose()),
                              Mat(perm * truth * perm.transpose()));
  CHECK(a.frobenius == doctest::Approx(b.frobenius).epsilon(1e-12));
  CHECK(a.spectral == doctest::Approx(b.spectral).epsilon(1e-8));
  CHECK(a.tp == b.tp);
  CHECK(a.tn == b.tn);
  CHECK(a.s_off == b.s_off);
}

TEST_CASE("sparse and dense metric overloads agree") {
  std::mt19937_64 rng(83);
  CovarianceFactor f = oracle::random_factor(8, 6, rng);
  const double lambda = 0.4 * lambda_max(f);
  PathEntry entry = cold_solve(f, lambda, 1e-6);
  Mat truth = build_theta({1, 8, 1, 0});
  Metrics sp = compute_metrics(entry.estimate, truth);
  Metrics dn = compute_metrics(entry.estimate.to_dense(), truth);
  CHECK(sp.frobenius == doctest::Approx(dn.frobenius).epsilon(1e-12));
  CHECK(sp.tp == dn.tp);
  CHECK(sp.tn == dn.tn);
  CHECK(sp.s_off == dn.s_off);
}

TEST_CASE("validation loss closed form") {
  // Omega = I, Sigma_val = I: loss = p/2 - p = -p/2
  CovarianceFactor val;
  val.A = RowMat(Mat::Identity(4, 4));
  auto pat = std::make_shared<const SparsityPattern>(SparsityPattern::full(4));
  Vec omega = Vec::Zero(pat->t());
  for (Index k = 0; k < pat->t(); ++k) {
    if (pat->is_diag(k)) omega[k] = 1.0;
  }
  SparseSymMatrix id(pat, std::move(omega));
  CHECK(validation_loss(id, val) == doctest::Approx(-2.0).epsilon(1e-14));
  // and equals the lambda = 0 objective
  std::mt19937_64 rng(84);
  CovarianceFactor rf = oracle::random_factor(4, 3, rng);
  Vec w = oracle::random_vec(pat->t(), rng);
  SparseSymMatrix m(pat, std::move(w));
  CHECK(validation_loss(m, rf) ==
        doctest::Approx(objective(m, rf, 0.0)).epsilon(1e-12));
}

TEST_CASE("min_eigenvalue and pd_repair") {
  Mat psd(2, 2);
  psd << 2.0, 0.5, 0.5, 1.0;
  CHECK(min_eigenvalue(psd) ==
        doctest::Approx(1.5 - std::sqrt(0.5)).epsilon(1e-8));
  CHECK((pd_repair(psd, 0.1) - psd).norm() == 0.0);  // already PD: untouched

  Mat indef = Mat::Zero(2, 2);
  indef.diagonal() << -1.0, 1.0;
  Mat fixed = pd_repair(indef, 0.1);
  CHECK(fixed(0, 0) == doctest::Approx(0.1).epsilon(1e-8));
  CHECK(fixed(1, 1) == doctest::Approx(2.1).epsilon(1e-8));
  CHECK(min_eigenvalue(fixed) >= 0.1 - 1e-8);

  // sparse overload agrees with the dense one
  std::mt19937_64 rng(85);
  auto pat = std::make_shared<const SparsityPattern>(SparsityPattern::full(6));
  Vec w = oracle::random_vec(pat->t(), rng);
  SparseSymMatrix m(pat, std::move(w));
  CHECK(min_eigenvalue(m) ==
        doctest::Approx(min_eigenvalue(m.to_dense())).epsilon(1e-7));
  SparseSymMatrix rep = pd_repair(m, 0.05);
  CHECK(min_eigenvalue(rep.to_dense()) >= 0.05 - 1e-7);
}

TEST_CASE("lambda_grid spans the requested fractions, descending") {
  std::vector<double> g = lambda_grid(2.0, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == doctest::Approx(1.8).epsilon(1e-14));
  CHECK(g.back() == doctest::Approx(0.2).epsilon(1e-14));
  for (size_t k = 1; k < g.size(); ++k) CHECK(g[k] < g[k - 1]);
  std::vector<double> one = lambda_grid(2.0, 1);
  REQUIRE(one.size() == 1);
}

TEST_CASE("cross-validation is deterministic and picks a sane lambda") {
  Dataset data = generate({1, 25, 80, 11});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  std::vector<double> grid = lambda_grid(lambda_max(f), 8);
  CvOptions opts;
  opts.folds = 4;
  opts.seed = 3;
  CvReport a = cross_validate(data, grid, opts);
  CvReport b = cross_validate(data, grid, opts);
  CHECK(a.chosen_lambda == b.chosen_lambda);
  CHECK(a.mean_loss == b.mean_loss);
  CHECK(a.sd_loss == b.sd_loss);
  CHECK((a.refit.to_dense() - b.refit.to_dense()).norm() == 0.0);
  CHECK(a.refit_eta <= opts.eps);
  CHECK(a.chosen_lambda == a.lambdas[a.chosen_index]);
  REQUIRE(a.mean_loss.size() == grid.size());
  // the refit satisfies the KKT system at the chosen lambda
  CHECK(residual_map(a.refit, f, a.chosen_lambda).eta <= opts.eps);
}

TEST_CASE("cross-validation keeps an identity truth nearly diagonal") {
  Dataset data = generate({1, 50, 500, 21});
  data.truth = Mat::Identity(50, 50);
  // overwrite with independent noise so the true precision is the identity
  data.X = sample_gaussian(Mat::Identity(50, 50), 500, 22).X;
  standardize(data);
  CovarianceFactor f = make_factor(data);
  CvReport rep = cross_validate(data, lambda_grid(lambda_max(f), 8), {});
  Metrics m = compute_metrics(rep.refit, *data.truth);
  CHECK(m.tn >= 0.99);
}

TEST_CASE("save_cv records the scoring rule and the chosen lambda") {
  namespace fs = std::filesystem;
  Dataset data = generate({1, 10, 40, 13});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  CvReport rep = cross_validate(data, lambda_grid(lambda_max(f), 4), {});
  const fs::path dir = fs::temp_directory_path() / "mars_cv_test";
  fs::create_directories(dir);
  const std::string path = (dir / "cv.csv").string();
  save_cv(path, rep);
  std::ifstream is(path);
  std::string all((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
  CHECK(all.find("validation loss") != std::string::npos);
  CHECK(all.find("chosen_lambda") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("bench protocol emits one row per model/solver/rep") {
  BenchSpec spec;
  spec.models = {{1, 20, 30, 0}};
  spec.solvers = {"mars", "ssnal"};
  spec.reps = 2;
  spec.lambdas_per_model = 3;
  BenchReport rep = bench_protocol(spec);
  REQUIRE(rep.rows.size() == 4);
  for (const auto& row : rep.rows) {
    CHECK(row.ok);
    CHECK(row.error.empty());
    CHECK(row.max_eta <= spec.tol);
    CHECK(row.wall_s > 0.0);
  }
  // the protocol is deterministic end to end
  BenchReport again = bench_protocol(spec);
  for (size_t k = 0; k < rep.rows.size(); ++k) {
    CHECK(rep.rows[k].solver == again.rows[k].solver);
    CHECK(rep.rows[k].s_off_last == again.rows[k].s_off_last);
    CHECK(rep.rows[k].max_eta == again.rows[k].max_eta);
  }

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mars_bench_test";
  fs::remove_all(dir);
  save_bench(dir.string(), rep);
  CHECK(fs::exists(dir / "bench.csv"));
  CHECK(fs::exists(dir / "bench.txt"));
  fs::remove_all(dir);
}

TEST_CASE("bench protocol records failures without aborting the run") {
  BenchSpec spec;
  spec.models = {{1, 20, 30, 0}};
  spec.solvers = {"nonesuch"};
  BenchReport rep = bench_protocol(spec);
  REQUIRE(rep.rows.size() == 1);
  CHECK(!rep.rows[0].ok);
  CHECK(!rep.rows[0].error.empty());
}
