#include "mars/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mars {

namespace {

Index count_off_nonzero(const Mat& m, double threshold) {
  Index c = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i != j && std::abs(m(i, j)) > threshold) ++c;
    }
  }
  return c;
}

// Omega v for a pattern-supported symmetric matrix.
void sparse_multiply(const SparseSymMatrix& m, const Vec& v, Vec& out) {
  out.setZero(v.size());
  const auto& kept = m.pattern->kept();
  for (Index k = 0; k < m.pattern->t(); ++k) {
    auto [i, j] = kept[k];
    const double w = m.omega[k];
    out[i] += w * v[j];
    if (i != j) out[j] += w * v[i];
  }
}

}  // namespace

Metrics compute_metrics(const Mat& estimate, const Mat& truth,
                        double small_threshold) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw DimensionMismatch("compute_metrics: estimate/truth shapes differ");
  }
  Metrics m;
  const Mat diff = estimate - truth;
  m.frobenius = diff.norm();
  m.spectral = spectral_norm(diff);
  m.infinity = diff.cwiseAbs().rowwise().sum().maxCoeff();
  Index true_nz = 0, true_z = 0, hit_nz = 0, hit_z = 0;
  const Index p = truth.rows();
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < p; ++i) {
      if (i == j) continue;
      const bool est_nz = estimate(i, j) != 0.0;
      if (truth(i, j) != 0.0) {
        ++true_nz;
        if (est_nz) ++hit_nz;
      } else {
        ++true_z;
        if (!est_nz) ++hit_z;
      }
    }
  }
  m.tp = true_nz > 0 ? static_cast<double>(hit_nz) / true_nz : 1.0;
  m.tn = true_z > 0 ? static_cast<double>(hit_z) / true_z : 1.0;
  m.s_off = count_off_nonzero(estimate, 0.0);
  m.s_bar_off = count_off_nonzero(estimate, small_threshold);
  return m;
}

Metrics compute_metrics(const SparseSymMatrix& estimate, const Mat& truth,
                        double small_threshold) {
  return compute_metrics(estimate.to_dense(), truth, small_threshold);
}

double validation_loss(const SparseSymMatrix& estimate,
                       const CovarianceFactor& val_factor) {
  RowMat m = sparse_times_factor(estimate, val_factor.A);
  return 0.5 * m.squaredNorm() - estimate.trace();
}

CvReport cross_validate(const Dataset& data, std::vector<double> lambdas,
                        const CvOptions& opts, const StoppingPolicy& policy,
                        const SsnConfig& cfg) {
  if (opts.folds < 2) throw SolverError("cross_validate: folds must be >= 2");
  if (data.n() < opts.folds) {
    throw SolverError("cross_validate: fewer samples than folds");
  }
  std::sort(lambdas.begin(), lambdas.end(), std::greater<double>());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  if (lambdas.empty() || lambdas.back() <= 0.0) {
    throw SolverError("cross_validate: lambdas must be positive");
  }

  // seeded shuffle + round-robin fold assignment (Fisher-Yates so the
  // partition is identical on every platform)
  std::vector<Index> perm(data.n());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(opts.seed);
  for (Index i = data.n() - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }

  const Index L = static_cast<Index>(lambdas.size());
  Mat losses(opts.folds, L);
  for (int f = 0; f < opts.folds; ++f) {
    std::vector<Index> train_rows, val_rows;
    for (Index k = 0; k < data.n(); ++k) {
      (static_cast<int>(k % opts.folds) == f ? val_rows : train_rows)
          .push_back(perm[k]);
    }
    Mat xt(static_cast<Index>(train_rows.size()), data.p());
    Mat xv(static_cast<Index>(val_rows.size()), data.p());
    for (Index k = 0; k < xt.rows(); ++k) xt.row(k) = data.X.row(train_rows[k]);
    for (Index k = 0; k < xv.rows(); ++k) xv.row(k) = data.X.row(val_rows[k]);
    if (opts.standardize_folds) {
      // scale both splits by the training fold's location and spread
      for (Index j = 0; j < data.p(); ++j) {
        const double mean = xt.col(j).mean();
        xt.col(j).array() -= mean;
        const double sd =
            std::sqrt(xt.col(j).squaredNorm() / static_cast<double>(xt.rows()));
        if (sd <= 1e-300) {
          throw DegenerateVariable("cross_validate: constant training column " +
                                   std::to_string(j + 1));
        }
        xt.col(j) /= sd;
        xv.col(j) = (xv.col(j).array() - mean) / sd;
      }
    }
    Dataset train{std::move(xt), opts.standardize_folds, std::nullopt};
    Dataset val{std::move(xv), false, std::nullopt};
    CovarianceFactor train_factor = make_factor(train);
    CovarianceFactor val_factor = make_factor(val);

    PathSpec path_spec;
    path_spec.lambdas = lambdas;
    path_spec.eps = opts.eps;
    PathResult path = solve_path(train_factor, path_spec, policy, cfg);
    for (Index j = 0; j < L; ++j) {
      losses(f, j) = validation_loss(path.entries[j].estimate, val_factor);
    }
  }

  CvReport report;
  report.lambdas = lambdas;
  report.mean_loss.resize(L);
  report.sd_loss.resize(L);
  for (Index j = 0; j < L; ++j) {
    const double mean = losses.col(j).mean();
    report.mean_loss[j] = mean;
    report.sd_loss[j] = std::sqrt((losses.col(j).array() - mean).square().sum() /
                                  (opts.folds - 1));
  }
  // one-standard-deviation rule: among lambdas whose mean loss is within one
  // fold standard deviation of the minimum, prefer the largest (sparsest fit);
  // the plain minimizer tends to overselect off-diagonal entries
  Index min_index = 0;
  for (Index j = 1; j < L; ++j) {
    if (report.mean_loss[j] < report.mean_loss[min_index]) {
      min_index = j;
    }
  }
  const double threshold =
      report.mean_loss[min_index] + report.sd_loss[min_index];
  report.chosen_index = min_index;
  for (Index j = 0; j <= min_index; ++j) {  // lambdas are sorted descending
    if (report.mean_loss[j] <= threshold) {
      report.chosen_index = j;
      break;
    }
  }
  report.chosen_lambda = lambdas[report.chosen_index];

  // refit on all data, warm-started down the grid to the chosen lambda
  CovarianceFactor full_factor = make_factor(data);
  PathSpec refit_spec;
  refit_spec.lambdas.assign(lambdas.begin(),
                            lambdas.begin() + report.chosen_index + 1);
  refit_spec.eps = opts.eps;
  PathResult refit = solve_path(full_factor, refit_spec, policy, cfg);
  report.refit = refit.entries.back().estimate;
  report.refit_eta = refit.entries.back().eta;
  return report;
}

void save_cv(const std::string& path, const CvReport& report,
             const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw SolverError("cannot open " + path + " for writing");
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "# scoring: unpenalized quadratic validation loss "
         "||Omega A_val||^2/2 - tr(Omega)\n";
  out << "# selection: largest lambda with mean loss within one fold "
         "standard deviation of the minimum\n";
  out << "# chosen_lambda " << report.chosen_lambda << '\n';
  out << "lambda,mean_loss,sd_loss\n";
  for (size_t j = 0; j < report.lambdas.size(); ++j) {
    out << report.lambdas[j] << ',' << report.mean_loss[j] << ','
        << report.sd_loss[j] << '\n';
  }
}

double min_eigenvalue(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("min_eigenvalue: matrix must be square");
  }
  const double s = spectral_norm(m);
  Mat shifted = -m;
  shifted.diagonal().array() += s;
  return s - spectral_norm(shifted);
}

double min_eigenvalue(const SparseSymMatrix& m) {
  const Index p = m.p();
  const double s = spectral_norm(FunctionMap(p, [&](const Vec& v, Vec& out) {
    sparse_multiply(m, v, out);
  }));
  const double t =
      spectral_norm(FunctionMap(p, [&](const Vec& v, Vec& out) {
        sparse_multiply(m, v, out);
        out = s * v - out;
      }));
  return s - t;
}

Mat pd_repair(const Mat& estimate, double margin) {
  const double gmin = min_eigenvalue(estimate);
  if (gmin > 0.0) return estimate;
  Mat out = estimate;
  out.diagonal().array() += std::abs(gmin) + margin;
  return out;
}

SparseSymMatrix pd_repair(const SparseSymMatrix& estimate, double margin) {
  const double gmin = min_eigenvalue(estimate);
  if (gmin > 0.0) return estimate;
  Vec omega = estimate.omega;
  const auto& kept = estimate.pattern->kept();
  for (Index k = 0; k < estimate.pattern->t(); ++k) {
    if (kept[k].first == kept[k].second) omega[k] += std::abs(gmin) + margin;
  }
  return SparseSymMatrix(estimate.pattern, std::move(omega));
}

std::vector<double> lambda_grid(double lam_max, int count, double hi,
                                double lo) {
  if (count < 1 || !(lam_max > 0.0) || !(lo > 0.0) || !(hi >= lo)) {
    throw SolverError("lambda_grid: invalid parameters");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = hi * lam_max;
    return grid;
  }
  for (int k = 0; k < count; ++k) {
    const double frac = hi - (hi - lo) * k / (count - 1);
    grid[k] = frac * lam_max;
  }
  return grid;
}

namespace {

struct CellOutcome {
  double max_eta = 0.0;
  Index s_off_last = 0;
  bool ok = true;
};

CellOutcome run_mars_cell(const CovarianceFactor& factor,
                          const std::vector<double>& grid, double tol,
                          bool warm) {
  CellOutcome out;
  if (warm) {
    PathSpec spec;
    spec.lambdas = grid;
    spec.eps = tol;
    PathResult path = solve_path(factor, spec);
    for (const auto& e : path.entries) {
      out.max_eta = std::max(out.max_eta, e.eta);
      out.ok = out.ok && e.converged;
    }
    out.s_off_last = path.entries.back().s_off;
  } else {
    for (double lam : grid) {
      PathEntry e = cold_solve(factor, lam, tol);
      out.max_eta = std::max(out.max_eta, e.eta);
      out.ok = out.ok && e.converged;
      out.s_off_last = e.s_off;
    }
  }
  return out;
}

CellOutcome run_full_cell(const std::string& solver,
                          const CovarianceFactor& factor,
                          const std::vector<double>& grid, double tol,
                          bool warm) {
  CellOutcome out;
  FullSolverOptions opts;
  opts.tol = tol;
  for (double lam : grid) {
    PenalizedProblem problem{factor, lam};
    FullSolveResult res;
    if (solver == "ssnal") {
      res = ssnal_solve(problem, {}, {}, opts);
    } else if (solver == "iadmm") {
      res = iadmm_solve(problem, 1.0, 1.618, opts);
    } else if (solver == "eadmm") {
      res = eadmm_solve(problem, 1.0, 1.618, opts);
    } else {
      throw SolverError("bench_protocol: unknown solver '" + solver + "'");
    }
    out.max_eta = std::max(out.max_eta, res.eta);
    out.ok = out.ok && res.converged;
    out.s_off_last = count_off_nonzero(res.omega, 0.0);
    if (warm) opts.omega0 = res.omega;
  }
  return out;
}

}  // namespace

BenchReport bench_protocol(const BenchSpec& spec) {
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.notes.push_back("timing includes factor construction, excludes data "
                         "generation");
  int model_idx = 0;
  for (const ModelSpec& model : spec.models) {
    for (int rep = 0; rep < spec.reps; ++rep) {
      ModelSpec ms = model;
      ms.seed = spec.seed + 1000003ULL * static_cast<std::uint64_t>(rep) +
                static_cast<std::uint64_t>(model_idx);
      Dataset data = generate(ms);
      standardize(data);
      for (const std::string& solver : spec.solvers) {
        BenchRow row;
        row.model_id = ms.model_id;
        row.p = ms.p;
        row.n = ms.n;
        row.solver = solver;
        row.rep = rep;
        row.warm = spec.warm;
        const auto t0 = clock::now();
        try {
          CovarianceFactor factor = make_factor(data);
          const double lam_max = lambda_max(factor);
          const auto grid = lambda_grid(lam_max, spec.lambdas_per_model);
          CellOutcome out =
              solver == "mars"
                  ? run_mars_cell(factor, grid, spec.tol, spec.warm)
                  : run_full_cell(solver, factor, grid, spec.tol, spec.warm);
          row.max_eta = out.max_eta;
          row.s_off_last = out.s_off_last;
          row.ok = out.ok;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
        row.wall_s =
            std::chrono::duration<double>(clock::now() - t0).count();
        report.rows.push_back(std::move(row));
      }
    }
    ++model_idx;
  }
  return report;
}

void save_bench(const std::string& dir, const BenchReport& report,
                const std::string& header_comment) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream csv(fs::path(dir) / "bench.csv");
    if (!csv) throw SolverError("cannot open bench.csv in " + dir);
    if (!header_comment.empty()) csv << "# " << header_comment << '\n';
    for (const auto& note : report.notes) csv << "# " << note << '\n';
    csv << "model,p,n,solver,rep,warm,wall_s,max_eta,s_off_last,ok,error\n";
    for (const auto& r : report.rows) {
      csv << r.model_id << ',' << r.p << ',' << r.n << ',' << r.solver << ','
          << r.rep << ',' << (r.warm ? 1 : 0) << ',' << r.wall_s << ','
          << r.max_eta << ',' << r.s_off_last << ',' << (r.ok ? 1 : 0) << ','
          << r.error << '\n';
    }
  }

  // aggregate mean|sd per (model, p, n, solver)
  struct Agg {
    std::vector<double> wall, eta;
    Index s_off = 0;
    int fails = 0;
  };
  std::map<std::tuple<int, Index, Index, std::string>, Agg> groups;
  for (const auto& r : report.rows) {
    Agg& a = groups[{r.model_id, r.p, r.n, r.solver}];
    a.wall.push_back(r.wall_s);
    a.eta.push_back(r.max_eta);
    a.s_off = r.s_off_last;
    if (!r.ok) ++a.fails;
  }
  auto mean_sd = [](const std::vector<double>& v) {
    const double mean =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd =
        v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    return std::pair<double, double>{mean, sd};
  };

  std::ofstream txt(fs::path(dir) / "bench.txt");
  if (!txt) throw SolverError("cannot open bench.txt in " + dir);
  if (!header_comment.empty()) txt << "# " << header_comment << '\n';
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %-6s %-6s %-7s %18s %20s %10s %6s\n",
                "model", "p", "n", "solver", "wall_s mean|sd", "max_eta mean|sd",
                "s_off", "fails");
  txt << line;
  for (const auto& [key, agg] : groups) {
    const auto [wm, ws] = mean_sd(agg.wall);
    const auto [em, es] = mean_sd(agg.eta);
    std::snprintf(line, sizeof(line),
                  "%-6d %-6lld %-6lld %-7s %9.3f | %6.3f %10.2e | %7.1e %10lld %6d\n",
                  std::get<0>(key), static_cast<long long>(std::get<1>(key)),
                  static_cast<long long>(std::get<2>(key)),
                  std::get<3>(key).c_str(), wm, ws, em, es,
                  static_cast<long long>(agg.s_off), agg.fails);
    txt << line;
  }
}

}  // namespace mars
