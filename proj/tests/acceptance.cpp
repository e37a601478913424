#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>

#include "mars/evalkit.hpp"
#include "oracles.hpp"

using namespace mars;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void report(int criterion, bool ok) {
  std::printf("criterion %d: %s\n", criterion, ok ? "PASS" : "FAIL");
  std::fflush(stdout);
}

// bit-exact serialization of a double stream, for the determinism gate
void ser(std::ostringstream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a,", v);
  os << buf;
}

void ser(std::ostringstream& os, const Mat& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) ser(os, m(i, j));
  }
}

struct CoreResult {
  bool ok = true;
  std::string blob;
};

// criterion 1 core: diagonal solutions at lambda_max
CoreResult run_lambda_max_gate() {
  CoreResult res;
  std::ostringstream blob;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<Index> pick_p(2, 20), pick_n(1, 10);
  for (int rep = 0; rep < 100; ++rep) {
    const Index p = pick_p(rng), n = pick_n(rng);
    CovarianceFactor f = oracle::random_factor(p, n, rng);
    double lmax = 0.0;
    try {
      lmax = lambda_max(f);
    } catch (const DegenerateVariable&) {
      continue;  // rank-deficient draw produced a zero variance
    }
    if (lmax <= 0.0) continue;
    PathEntry entry = cold_solve(f, lmax, 1e-10);
    const Mat est = entry.estimate.to_dense();
    const Vec d = f.sigma_diag();
    bool good = entry.estimate.s_off(0.0) == 0;
    for (Index i = 0; i < p; ++i) {
      good = good && std::abs(est(i, i) - 1.0 / d[i]) <= 1e-8;
    }
    good = good && residual_map(entry.estimate, f, lmax).eta <= 1e-10;
    res.ok = res.ok && good;
    ser(blob, est);
  }
  res.blob = blob.str();
  return res;
}

// A p x n factor with A A^T well conditioned: eigenvalues in [0.5, 2] on a
// random orthogonal basis, completed to width n by a row-orthonormal matrix.
CovarianceFactor conditioned_factor(Index p, Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Mat> qr_p(oracle::random_mat(p, p, rng));
  Mat u = qr_p.householderQ() * Mat::Identity(p, p);
  std::uniform_real_distribution<double> ev(0.5, 2.0);
  Vec eigs(p);
  for (Index i = 0; i < p; ++i) eigs[i] = ev(rng);
  Eigen::HouseholderQR<Mat> qr_n(oracle::random_mat(n, p, rng));
  Mat w = (qr_n.householderQ() * Mat::Identity(n, p)).transpose();  // p x n
  CovarianceFactor f;
  f.A = RowMat(u * eigs.cwiseSqrt().asDiagonal() * w);
  return f;
}

// criterion 2 core: proximal-gradient oracle equivalence on well-conditioned
// random factors, so the minimizer exists and is unique. Cells with n < p
// are skipped: a width-n factor has rank at most n, and for these small
// dimensions the off-diagonal-penalized loss is unbounded below at every
// tested lambda (a null-space direction with positive trace exists), so no
// estimator is defined and no oracle comparison is possible.
CoreResult run_oracle_equivalence() {
  CoreResult res;
  std::ostringstream blob;
  for (Index p : {5, 10}) {
    for (Index n : {5, 20}) {
      if (n < p) continue;
      for (double frac : {0.9, 0.5, 0.2}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
          std::mt19937_64 rng(4000 + seed * 97 + p * 7 + n);
          CovarianceFactor f = conditioned_factor(p, n, rng);
          const double lambda = frac * lambda_max(f);
          PathEntry entry = cold_solve(f, lambda, 1e-8);
          oracle::PgResult pg = oracle::prox_gradient(f, lambda, 1e-10);
          const double obj = entry.objective;
          const bool good =
              entry.converged && pg.r_norm <= 1e-10 &&
              std::abs(obj - pg.objective) <=
                  1e-6 * (1.0 + std::abs(pg.objective)) &&
              (entry.estimate.to_dense() - pg.omega).norm() <= 1e-4;
          res.ok = res.ok && good;
          ser(blob, entry.estimate.to_dense());
          ser(blob, obj);
        }
      }
    }
  }
  res.blob = blob.str();
  return res;
}

// criterion 3 core: four solvers on a 10-lambda grid, Model 1, p = 100
CoreResult run_cross_solver(bool kkt_reverify) {
  CoreResult res;
  std::ostringstream blob;
  Dataset data = generate({1, 100, 50, 77});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  // grid floor at 0.25 lambda_max: with n = 50 < p the quadratic is rank
  // deficient, and below that level the optimum stops being unique, so
  // different solvers may legitimately return different minimizers
  std::vector<double> grid = lambda_grid(lambda_max(f), 10, 0.9, 0.25);
  const double tol = 1e-6;

  PathSpec spec;
  spec.lambdas = grid;
  spec.eps = tol;
  PathResult mars = solve_path(f, spec);

  FullSolverOptions opt_sn, opt_ia, opt_ea;
  opt_sn.tol = opt_ia.tol = opt_ea.tol = tol;
  for (size_t k = 0; k < grid.size(); ++k) {
    PenalizedProblem problem{f, grid[k]};
    FullSolveResult sn = ssnal_solve(problem, {}, {}, opt_sn);
    FullSolveResult ia = iadmm_solve(problem, 1.0, 1.618, opt_ia);
    FullSolveResult ea = eadmm_solve(problem, 1.0, 1.618, opt_ea);
    opt_sn.omega0 = sn.omega;
    opt_ia.omega0 = ia.omega;
    opt_ea.omega0 = ea.omega;

    const Mat dense[4] = {mars.entries[k].estimate.to_dense(), sn.omega,
                          ia.omega, ea.omega};
    bool good = mars.entries[k].converged && sn.converged && ia.converged &&
                ea.converged;
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        const double rel =
            (dense[a] - dense[b]).norm() / (1.0 + dense[a].norm());
        good = good && rel <= 1e-3;
      }
    }
    if (kkt_reverify) {
      good = good && residual_map(mars.entries[k].estimate, f, grid[k]).eta <= tol;
      good = good && residual_info_dense(sn.omega, f, grid[k]).eta <= tol;
      good = good && residual_info_dense(ia.omega, f, grid[k]).eta <= tol;
      good = good && residual_info_dense(ea.omega, f, grid[k]).eta <= tol;
    }
    res.ok = res.ok && good;
    for (const Mat& m : dense) ser(blob, m);
  }
  res.blob = blob.str();
  return res;
}

// criterion 7 core: desk-scale support-recovery study with 5-fold CV
struct CvStudy {
  bool ok = true;
  double mean_tp = 0.0, mean_tn = 0.0, mean_gap = 0.0;
  std::string blob;
};

CvStudy run_cv_study(int reps) {
  CvStudy out;
  std::ostringstream blob;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data = generate({1, 200, 400, 9000 + std::uint64_t(rep)});
    standardize(data);
    CovarianceFactor f = make_factor(data);
    CvOptions opts;
    opts.folds = 5;
    opts.seed = std::uint64_t(rep);
    CvReport cv = cross_validate(data, lambda_grid(lambda_max(f), 10), opts);
    Metrics m = compute_metrics(cv.refit, *data.truth);
    out.mean_tp += m.tp;
    out.mean_tn += m.tn;
    if (m.s_off > 0) {
      out.mean_gap += double(m.s_off - m.s_bar_off) / double(m.s_off);
    }
    ser(blob, cv.chosen_lambda);
    for (double v : cv.mean_loss) ser(blob, v);
    ser(blob, cv.refit.to_dense());
  }
  out.mean_tp /= reps;
  out.mean_tn /= reps;
  out.mean_gap /= reps;
  out.blob = blob.str();
  return out;
}

}  // namespace

TEST_CASE("criterion 1") {
  const double t0 = now_s();
  CoreResult res = run_lambda_max_gate();
  const bool ok = res.ok && now_s() - t0 < 5.0;
  report(1, ok);
  CHECK(ok);
}

TEST_CASE("criterion 2") {
  const double t0 = now_s();
  CoreResult res = run_oracle_equivalence();
  const bool ok = res.ok && now_s() - t0 < 60.0;
  report(2, ok);
  CHECK(ok);
}

TEST_CASE("criterion 3") {
  const double t0 = now_s();
  CoreResult res = run_cross_solver(false);
  const bool ok = res.ok && now_s() - t0 < 120.0;
  report(3, ok);
  CHECK(ok);
}

TEST_CASE("criterion 4") {
  // every converged estimate re-verifies through the independent residual map
  CoreResult res = run_cross_solver(true);
  report(4, res.ok);
  CHECK(res.ok);
}

TEST_CASE("criterion 5") {
  bool ok = true;
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> coin(0, 2);
  for (int rep = 0; rep < 100; ++rep) {
    const Index p = 4 + rep % 4, n = 2 + rep % 3;
    std::vector<SparsityPattern::Pair> pairs;
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        if (coin(rng) == 0) pairs.push_back({i, j});
      }
    }
    auto pat = std::make_shared<const SparsityPattern>(p, std::move(pairs));
    ReducedVectors rv = make_reduced_vectors(*pat);
    CovarianceFactor f = oracle::random_factor(p, n, rng);

    // four adjoint identities, relative 1e-12
    Mat omega = oracle::random_sym(p, rng);
    Vec v = oracle::random_vec(pat->t(), rng);
    RowMat y = RowMat(oracle::random_mat(p, n, rng));
    const double a1 = L_apply(omega, *pat).dot(v);
    const double b1 =
        (omega.array() * L_star(v, pat, rv.e3).to_dense().array()).sum();
    ok = ok && std::abs(a1 - b1) <= 1e-12 * (1.0 + std::abs(a1));
    Vec w = oracle::random_vec(pat->t(), rng);
    const double a2 =
        (L_dagger(w, pat).to_dense().array() * omega.array()).sum();
    const double b2 = w.dot(Ldagger_star(omega, *pat, rv.e4));
    ok = ok && std::abs(a2 - b2) <= 1e-12 * (1.0 + std::abs(a2));
    const double a3 = S_apply(y, f, *pat).dot(v);
    const double b3 =
        (y.array() * S_star(v, f, *pat, rv.e3).array()).sum();
    ok = ok && std::abs(a3 - b3) <= 1e-12 * (1.0 + std::abs(a3));
    Mat full_s = big_S_apply(y, f);
    const double a4 = (full_s.array() * omega.array()).sum();
    const double b4 = (Mat(y).array() * (omega * Mat(f.A)).array()).sum();
    ok = ok && std::abs(a4 - b4) <= 1e-12 * (1.0 + std::abs(a4));

    // gradient of psi vs central differences at h = 1e-5
    ReducedProblem prob(f, pat, 0.3);
    Vec x = oracle::random_vec(pat->t(), rng);
    const double sigma = 1.0 + (rep % 3);
    RowMat grad = psi_gradient(y, x, sigma, prob);
    Vec flat(p * n);
    Eigen::Map<RowMat>(flat.data(), p, n) = y;
    Vec fd = finite_diff_gradient(
        [&](const Vec& u) {
          RowMat ym = Eigen::Map<const RowMat>(u.data(), p, n);
          return psi_value(ym, x, sigma, prob);
        },
        flat, 1e-5);
    Vec gflat(p * n);
    Eigen::Map<RowMat>(gflat.data(), p, n) = grad;
    ok = ok && (gflat - fd).cwiseAbs().maxCoeff() <= 1e-5;

    // Newton operator self-adjoint and PSD
    Vec fvec = x / sigma - S_apply(y, f, *prob.pattern) + rv.e1;
    NewtonOperator op(prob, jacobian_mask(fvec, prob), sigma);
    Vec va = oracle::random_vec(p * n, rng);
    Vec vb = oracle::random_vec(p * n, rng);
    Vec oa, ob;
    op.apply(va, oa);
    op.apply(vb, ob);
    ok = ok && std::abs(oa.dot(vb) - va.dot(ob)) <=
                   1e-10 * (1.0 + std::abs(oa.dot(vb)));
    ok = ok && oa.dot(va) >= -1e-10 * va.squaredNorm();

    // Moreau residual identity
    Mat dense_omega = oracle::random_sym(p, rng);
    Mat r1 = residual_matrix(dense_omega, f, 0.3);
    Mat r2 = residual_matrix_prox(dense_omega, f, 0.3);
    ok = ok && (r1 - r2).norm() <= 1e-12 * (1.0 + r1.norm());
  }
  report(5, ok);
  CHECK(ok);
}

TEST_CASE("criterion 6") {
  Dataset data = generate({1, 200, 400, 606});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  const double lambda = 0.3 * lambda_max(f);
  PathEntry warm = cold_solve(f, lambda, 1e-4);
  ReducedProblem prob(f, warm.estimate.pattern, lambda);
  SsnConfig cfg;
  cfg.max_newton = 100;
  // stop at 1e-7: far below the 1e-3 probe threshold yet above the floor
  // where finite CG precision flattens the tail
  SsnResult res = ssn_solve(Vec::Zero(prob.pattern->t()), 1.0, prob, cfg,
                            1e-7, 1e18, 1e-13, RowMat());
  const auto& g = res.grad_norm_trace;
  bool ok = g.size() >= 3;
  int checked = 0;
  if (ok) {
    for (size_t j = g.size() - 3; j + 1 < g.size(); ++j) {
      if (g[j] <= 1e-3) {
        ok = ok && g[j + 1] <= std::pow(g[j], 1.1);
        ++checked;
      }
    }
  }
  ok = ok && checked >= 1;  // the probe actually fired
  report(6, ok);
  CHECK(ok);
}

TEST_CASE("criterion 7") {
  const double t0 = now_s();
  CvStudy study = run_cv_study(20);
  const double elapsed = now_s() - t0;
  const bool ok = study.ok && study.mean_tp >= 0.70 &&
                  study.mean_tn >= 0.98 && study.mean_gap <= 0.02 &&
                  elapsed < 600.0;
  std::printf("criterion 7 detail: tp %.4f tn %.4f gap %.4f wall %.1fs\n",
              study.mean_tp, study.mean_tn, study.mean_gap, elapsed);
  report(7, ok);
  CHECK(ok);
}

TEST_CASE("criterion 8") {
  Dataset data = generate({1, 2000, 100, 808});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  // with n = 100 << p = 2000 the solution is only sparse in the upper part
  // of the grid; below ~0.4 lambda_max the support approaches p^2 and no
  // solver is fast, so the path covers the sparse operating regime
  std::vector<double> grid = lambda_grid(lambda_max(f), 10, 0.9, 0.45);

  double t0 = now_s();
  PathSpec spec;
  spec.lambdas = grid;
  spec.eps = 1e-4;
  PathResult mars = solve_path(f, spec);
  const double mars_s = now_s() - t0;

  t0 = now_s();
  FullSolverOptions opts;
  opts.tol = 1e-4;
  bool ssnal_ok = true;
  for (double lambda : grid) {
    FullSolveResult res = ssnal_solve({f, lambda}, {}, {}, opts);
    ssnal_ok = ssnal_ok && res.converged;
    opts.omega0 = std::move(res.omega);
  }
  const double ssnal_s = now_s() - t0;

  bool mars_ok = true;
  for (const auto& e : mars.entries) mars_ok = mars_ok && e.converged;
  const bool ok =
      mars_ok && ssnal_ok && mars_s < 60.0 && mars_s <= 0.5 * ssnal_s;
  std::printf("criterion 8 detail: mars %.2fs ssnal %.2fs\n", mars_s, ssnal_s);
  report(8, ok);
  CHECK(ok);
}

TEST_CASE("criterion 9") {
  Dataset data = generate({1, 2000, 100, 808});
  standardize(data);
  CovarianceFactor f = make_factor(data);
  PathSpec spec;
  spec.lambdas = lambda_grid(lambda_max(f), 10, 0.9, 0.45);  // as criterion 8
  spec.eps = 1e-4;
  PathResult mars = solve_path(f, spec);
  int cheap_rounds = 0;
  bool outer_ok = true;
  for (const auto& e : mars.entries) {
    if (e.sieve_rounds <= 3) ++cheap_rounds;
    outer_ok = outer_ok && e.max_alm_outer <= 10;
  }
  const bool ok = outer_ok &&
                  cheap_rounds * 10 >= int(mars.entries.size()) * 9;
  std::printf("criterion 9 detail: <=3 rounds for %d/%zu, outer ok %d\n",
              cheap_rounds, mars.entries.size(), int(outer_ok));
  report(9, ok);
  CHECK(ok);
}

TEST_CASE("criterion 10") {
  CoreResult a1 = run_lambda_max_gate();
  CoreResult b1 = run_lambda_max_gate();
  CoreResult a2 = run_oracle_equivalence();
  CoreResult b2 = run_oracle_equivalence();
  CoreResult a3 = run_cross_solver(false);
  CoreResult b3 = run_cross_solver(false);
  // criterion 7's protocol replayed on a 2-replication slice
  CvStudy a7 = run_cv_study(2);
  CvStudy b7 = run_cv_study(2);
  const bool ok = a1.blob == b1.blob && a2.blob == b2.blob &&
                  a3.blob == b3.blob && a7.blob == b7.blob &&
                  !a1.blob.empty() && !a2.blob.empty() && !a3.blob.empty() &&
                  !a7.blob.empty();
  report(10, ok);
  CHECK(ok);
}
