// Command-line front end: data generation, single solves, lambda paths,
// cross-validation, and the benchmark harness.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mars/evalkit.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes
constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kUsage = 2;
constexpr int kGateFailure = 3;

struct GlobalOpts {
  std::uint64_t seed = 1;
  int threads = 1;
  double tol = 1e-4;
  std::string out_dir = ".";
};

std::string header_line(const GlobalOpts& g, int argc, char** argv) {
  std::ostringstream os;
  os << "mars " << kVersion << " seed=" << g.seed << " flags:";
  for (int i = 1; i < argc; ++i) os << ' ' << argv[i];
  return os.str();
}

mars::SparseSymMatrix dense_to_sparse(const mars::Mat& m) {
  std::vector<mars::SparsityPattern::Pair> pairs;
  std::vector<double> vals;
  const mars::Index p = m.rows();
  for (mars::Index i = 0; i < p; ++i) {
    for (mars::Index j = i; j < p; ++j) {
      if (i == j || m(i, j) != 0.0) {
        pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
        vals.push_back(m(i, j));
      }
    }
  }
  auto pattern = std::make_shared<const mars::SparsityPattern>(
      mars::SparsityPattern(p, std::move(pairs)));
  mars::Vec omega(pattern->t());
  for (mars::Index k = 0; k < pattern->t(); ++k) {
    auto [i, j] = pattern->kept()[k];
    omega[k] = m(i, j);
  }
  return mars::SparseSymMatrix(pattern, std::move(omega));
}

struct DataArgs {
  std::string data_csv;
  std::string factor_csv;
  bool has_header = false;
  bool no_standardize = false;
};

void add_data_flags(CLI::App* cmd, DataArgs& args) {
  auto* data = cmd->add_option("--data", args.data_csv, "sample CSV, rows = samples");
  auto* factor = cmd->add_option("--factor", args.factor_csv,
                                 "covariance factor A as CSV (p rows, n cols)");
  data->excludes(factor);
  cmd->add_flag("--header", args.has_header, "CSV has a header row");
  cmd->add_flag("--no-standardize", args.no_standardize,
                "skip per-variable standardization");
}

mars::CovarianceFactor load_factor(const DataArgs& args) {
  if (!args.factor_csv.empty()) {
    mars::Dataset raw = mars::load_csv(args.factor_csv, args.has_header);
    mars::CovarianceFactor factor;
    factor.A = mars::RowMat(raw.X);
    return factor;
  }
  if (args.data_csv.empty()) {
    throw CLI::ValidationError("--data or --factor is required");
  }
  mars::Dataset data = mars::load_csv(args.data_csv, args.has_header);
  if (!args.no_standardize) mars::standardize(data);
  return mars::make_factor(data);
}

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stod(tok));
  }
  return out;
}

// "--grid min:max:count" over absolute lambda values, capped at lambda_max.
std::vector<double> parse_grid(const std::string& text, double lam_max,
                               std::vector<std::string>& notices) {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::stringstream ss(text);
  if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' ||
      count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw CLI::ValidationError("--grid expects min:max:count with 0 < min <= max");
  }
  if (hi > lam_max) {
    notices.push_back("grid upper end capped at lambda_max");
    hi = lam_max;
    lo = std::min(lo, hi);
  }
  std::vector<double> grid;
  if (count == 1) {
    grid.push_back(hi);
  } else {
    for (int k = 0; k < count; ++k) {
      grid.push_back(hi - (hi - lo) * k / (count - 1));
    }
  }
  // capping can merge endpoints; keep the list strictly decreasing
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct SolveStats {
  mars::SparseSymMatrix estimate;
  double eta = 0.0;
  double objective = 0.0;
  mars::Index s_off = 0;
  bool converged = true;
};

SolveStats solve_with(const std::string& solver,
                      const mars::CovarianceFactor& factor, double lambda,
                      double tol, const mars::Mat* omega0) {
  SolveStats st;
  if (solver == "mars") {
    mars::PathEntry entry = mars::cold_solve(factor, lambda, tol);
    st.estimate = entry.estimate;
    st.eta = entry.eta;
    st.objective = entry.objective;
    st.s_off = entry.s_off;
    st.converged = entry.converged;
    return st;
  }
  mars::FullSolverOptions opts;
  opts.tol = tol;
  if (omega0) opts.omega0 = *omega0;
  mars::PenalizedProblem problem{factor, lambda};
  mars::FullSolveResult res;
  if (solver == "ssnal") {
    res = mars::ssnal_solve(problem, {}, {}, opts);
  } else if (solver == "iadmm") {
    res = mars::iadmm_solve(problem, 1.0, 1.618, opts);
  } else if (solver == "eadmm") {
    res = mars::eadmm_solve(problem, 1.0, 1.618, opts);
  } else {
    throw CLI::ValidationError("unknown solver '" + solver + "'");
  }
  st.estimate = dense_to_sparse(res.omega);
  st.eta = res.eta;
  st.objective = mars::objective_dense(res.omega, factor, lambda);
  st.s_off = st.estimate.s_off();
  st.converged = res.converged;
  return st;
}

int cmd_gen(const GlobalOpts& g, int model, mars::Index p, mars::Index n,
            const std::string& header) {
  mars::ModelSpec spec{model, p, n, g.seed};
  mars::Dataset data = mars::generate(spec);
  fs::create_directories(g.out_dir);
  mars::save_csv((fs::path(g.out_dir) / "data.csv").string(), data.X, header);
  mars::save_coord((fs::path(g.out_dir) / "truth.coord").string(),
                   dense_to_sparse(*data.truth));
  mars::standardize(data);
  const double lam_max = mars::lambda_max(mars::make_factor(data));
  std::cout << "lambda_max " << lam_max << '\n';
  return kOk;
}

int cmd_solve(const GlobalOpts& g, const DataArgs& args, double lambda,
              const std::string& solver, const std::string& header) {
  if (!(lambda > 0.0)) throw CLI::ValidationError("--lambda must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  mars::CovarianceFactor factor = load_factor(args);
  SolveStats st = solve_with(solver, factor, lambda, g.tol, nullptr);
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  fs::create_directories(g.out_dir);
  {
    std::ofstream out(fs::path(g.out_dir) / "estimate.coord");
    out << "# " << header << '\n';
    mars::write_coord(out, st.estimate);
  }
  std::cout << "eta " << st.eta << " objective " << st.objective << " s_off "
            << st.s_off << " wall_ms " << wall_ms << '\n';
  return st.converged ? kOk : kSolverFailure;
}

int cmd_path(const GlobalOpts& g, const DataArgs& args,
             const std::string& lambdas_text, const std::string& grid_text,
             bool cold, const std::string& solver, const std::string& header) {
  mars::CovarianceFactor factor = load_factor(args);
  const double lam_max = mars::lambda_max(factor);
  std::vector<std::string> notices;
  std::vector<double> lambdas;
  if (!grid_text.empty()) {
    lambdas = parse_grid(grid_text, lam_max, notices);
  } else if (!lambdas_text.empty()) {
    lambdas = parse_lambda_list(lambdas_text);
  } else {
    throw CLI::ValidationError("--lambdas or --grid is required");
  }
  for (size_t i = 0; i + 1 < lambdas.size(); ++i) {
    if (!(lambdas[i] > lambdas[i + 1])) {
      throw CLI::ValidationError("lambdas must be strictly decreasing");
    }
  }

  mars::PathResult result;
  if (solver == "mars" && !cold) {
    mars::PathSpec spec;
    spec.lambdas = lambdas;
    spec.eps = g.tol;
    result = mars::solve_path(factor, spec);
  } else {
    mars::Mat prev;
    for (double lam : lambdas) {
      const auto t0 = std::chrono::steady_clock::now();
      SolveStats st = solve_with(solver, factor, lam, g.tol,
                                 (!cold && prev.size()) ? &prev : nullptr);
      mars::PathEntry entry;
      entry.lambda = entry.lambda_requested = lam;
      entry.estimate = st.estimate;
      entry.eta = st.eta;
      entry.objective = st.objective;
      entry.s_off = st.s_off;
      entry.s_bar_off = st.estimate.s_off(1e-5);
      entry.converged = st.converged;
      entry.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      if (solver != "mars" && !cold) prev = st.estimate.to_dense();
      result.entries.push_back(std::move(entry));
    }
  }
  result.notices.insert(result.notices.end(), notices.begin(), notices.end());
  mars::save_path(g.out_dir, result, header);
  for (const auto& notice : result.notices) std::cout << "note: " << notice << '\n';
  bool ok = true;
  for (const auto& e : result.entries) ok = ok && e.converged;
  std::cout << "wrote " << result.entries.size() << " estimates to " << g.out_dir
            << '\n';
  return ok ? kOk : kSolverFailure;
}

int cmd_cv(const GlobalOpts& g, const DataArgs& args,
           const std::string& lambdas_text, const std::string& grid_text,
           int folds, const std::string& header) {
  if (args.data_csv.empty()) {
    throw CLI::ValidationError("cv needs --data (raw samples)");
  }
  mars::Dataset data = mars::load_csv(args.data_csv, args.has_header);
  if (!args.no_standardize) mars::standardize(data);
  const double lam_max = mars::lambda_max(mars::make_factor(data));
  std::vector<std::string> notices;
  std::vector<double> lambdas;
  if (!grid_text.empty()) {
    lambdas = parse_grid(grid_text, lam_max, notices);
  } else if (!lambdas_text.empty()) {
    lambdas = parse_lambda_list(lambdas_text);
  } else {
    lambdas = mars::lambda_grid(lam_max, 10);
  }
  mars::CvOptions opts;
  opts.folds = folds;
  opts.eps = g.tol;
  opts.seed = g.seed;
  mars::CvReport report = mars::cross_validate(data, lambdas, opts);
  fs::create_directories(g.out_dir);
  mars::save_cv((fs::path(g.out_dir) / "cv.csv").string(), report, header);
  {
    std::ofstream out(fs::path(g.out_dir) / "refit.coord");
    out << "# " << header << '\n';
    mars::write_coord(out, report.refit);
  }
  std::cout << "chosen_lambda " << report.chosen_lambda << " refit_eta "
            << report.refit_eta << '\n';
  return kOk;
}

int cmd_bench(const GlobalOpts& g, const std::string& suite,
              const std::string& solvers_text, int reps, bool gate,
              const std::string& header) {
  mars::BenchSpec spec;
  spec.seed = g.seed;
  spec.tol = g.tol;
  spec.reps = reps;
  std::stringstream ss(solvers_text);
  std::string tok;
  while (std::getline(ss, tok, ',')) spec.solvers.push_back(tok);
  if (suite == "small") {
    spec.models.push_back({1, 100, 50, g.seed});
  } else if (suite == "paper-desk") {
    spec.models.push_back({1, 2000, 100, g.seed});
  } else {
    throw CLI::ValidationError("--suite must be small or paper-desk");
  }
  mars::BenchReport report = mars::bench_protocol(spec);
  mars::save_bench(g.out_dir, report, header);

  bool all_ok = true;
  double mars_wall = 0.0, ssnal_wall = 0.0;
  int mars_cells = 0, ssnal_cells = 0;
  for (const auto& r : report.rows) {
    all_ok = all_ok && r.ok;
    if (r.solver == "mars") {
      mars_wall += r.wall_s;
      ++mars_cells;
    } else if (r.solver == "ssnal") {
      ssnal_wall += r.wall_s;
      ++ssnal_cells;
    }
  }
  if (!all_ok) return kSolverFailure;
  if (gate) {
    bool pass = true;
    if (suite == "paper-desk" && mars_cells > 0) {
      pass = pass && (mars_wall / mars_cells < 60.0);
      if (ssnal_cells > 0) {
        pass = pass && (mars_wall / mars_cells <=
                        0.5 * (ssnal_wall / ssnal_cells));
      }
    }
    if (!pass) {
      std::cout << "gate: FAIL\n";
      return kGateFailure;
    }
    std::cout << "gate: PASS\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse precision matrix estimation under the penalized "
               "quadratic loss"};
  app.require_subcommand(1);
  app.set_config("--config")->configurable(false);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")
      ->capture_default_str();
  app.add_option("--tol", g.tol, "relative KKT tolerance")
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "output directory")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  int model = 1;
  mars::Index gen_p = 100, gen_n = 50;
  gen->add_option("--model", model, "model id 1..5")->required();
  gen->add_option("--p", gen_p, "dimension")->required();
  gen->add_option("--n", gen_n, "sample count")->required();

  auto* solve = app.add_subcommand("solve", "solve at one lambda");
  DataArgs solve_args;
  add_data_flags(solve, solve_args);
  double lambda = 0.0;
  std::string solver = "mars";
  solve->add_option("--lambda", lambda, "penalty level")->required();
  solve->add_option("--solver", solver, "mars|ssnal|iadmm|eadmm")
      ->check(CLI::IsMember({"mars", "ssnal", "iadmm", "eadmm"}));

  auto* path = app.add_subcommand("path", "solve a lambda path");
  DataArgs path_args;
  add_data_flags(path, path_args);
  std::string lambdas_text, grid_text, path_solver = "mars";
  bool cold = false;
  path->add_option("--lambdas", lambdas_text, "comma-separated, decreasing");
  path->add_option("--grid", grid_text, "min:max:count");
  path->add_flag("--cold", cold, "restart from the diagonal at each lambda");
  path->add_option("--solver", path_solver, "mars|ssnal|iadmm|eadmm")
      ->check(CLI::IsMember({"mars", "ssnal", "iadmm", "eadmm"}));

  auto* cv = app.add_subcommand("cv", "cross-validate over a lambda grid");
  DataArgs cv_args;
  add_data_flags(cv, cv_args);
  std::string cv_lambdas, cv_grid;
  int folds = 5;
  cv->add_option("--lambdas", cv_lambdas, "comma-separated, decreasing");
  cv->add_option("--grid", cv_grid, "min:max:count");
  cv->add_option("--folds", folds, "fold count")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "run a benchmark suite");
  std::string suite = "small", solvers_text = "mars,ssnal";
  int reps = 1;
  bool gate = false;
  bench->add_option("--suite", suite, "small|paper-desk")
      ->capture_default_str();
  bench->add_option("--solvers", solvers_text, "comma-separated solver list")
      ->capture_default_str();
  bench->add_option("--reps", reps, "replications")->capture_default_str();
  bench->add_flag("--gate", gate, "turn acceptance checks into exit status");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  Eigen::setNbThreads(g.threads);
  const std::string header = header_line(g, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen(g, model, gen_p, gen_n, header);
    if (solve->parsed())
      return cmd_solve(g, solve_args, lambda, solver, header);
    if (path->parsed())
      return cmd_path(g, path_args, lambdas_text, grid_text, cold, path_solver,
                      header);
    if (cv->parsed())
      return cmd_cv(g, cv_args, cv_lambdas, cv_grid, folds, header);
    if (bench->parsed())
      return cmd_bench(g, suite, solvers_text, reps, gate, header);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const mars::InvalidDimension& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const mars::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kUsage;
}
