#pragma once

#include <string>
#include <vector>

#include "mars/baselines.hpp"
#include "mars/sieving.hpp"
#include "mars/synth.hpp"

namespace mars {

// Support-recovery and error metrics of an estimate against the truth.
struct Metrics {
  double frobenius = 0.0;
  double spectral = 0.0;
  double infinity = 0.0;  // max absolute row sum of the difference
  double tp = 0.0;        // recovered fraction of true off-diagonal nonzeros
  double tn = 0.0;        // recovered fraction of true off-diagonal zeros
  Index s_off = 0;
  Index s_bar_off = 0;  // off-diagonal entries with |value| > small_threshold
};

Metrics compute_metrics(const Mat& estimate, const Mat& truth,
                        double small_threshold = 1e-5);
Metrics compute_metrics(const SparseSymMatrix& estimate, const Mat& truth,
                        double small_threshold = 1e-5);

// Unpenalized validation criterion ||Omega A_val||_F^2 / 2 - tr(Omega).
double validation_loss(const SparseSymMatrix& estimate,
                       const CovarianceFactor& val_factor);

struct CvOptions {
  int folds = 5;
  double eps = 1e-4;          // path tolerance per fold
  std::uint64_t seed = 0;     // fold-assignment shuffle
  bool standardize_folds = true;
};

struct CvReport {
  std::vector<double> lambdas;
  std::vector<double> mean_loss;
  std::vector<double> sd_loss;
  Index chosen_index = 0;
  double chosen_lambda = 0.0;
  SparseSymMatrix refit;  // warm-started refit on all data at chosen_lambda
  double refit_eta = 0.0;
};

// K-fold CV over a decreasing lambda grid; fold assignment is a seeded
// shuffle followed by round-robin, so reports reproduce exactly.
CvReport cross_validate(const Dataset& data, std::vector<double> lambdas,
                        const CvOptions& opts = {},
                        const StoppingPolicy& policy = {},
                        const SsnConfig& cfg = {});

void save_cv(const std::string& path, const CvReport& report,
             const std::string& header_comment = "");

// Smallest eigenvalue via two power iterations (||M||_2, then ||sI - M||_2).
double min_eigenvalue(const Mat& m);
double min_eigenvalue(const SparseSymMatrix& m);

// If gamma_min <= 0, shifts the diagonal by |gamma_min| + margin.
Mat pd_repair(const Mat& estimate, double margin);
SparseSymMatrix pd_repair(const SparseSymMatrix& estimate, double margin);

// count lambdas between hi*lambda_max and lo*lambda_max, evenly spaced,
// descending.
std::vector<double> lambda_grid(double lam_max, int count, double hi = 0.9,
                                double lo = 0.1);

struct BenchSpec {
  std::vector<ModelSpec> models;
  int lambdas_per_model = 10;
  std::vector<std::string> solvers;  // mars | ssnal | iadmm | eadmm
  int reps = 1;
  std::uint64_t seed = 1;
  double tol = 1e-4;
  bool warm = true;  // warm-start each solver along the path
};

// One row per (model instance, solver, replication); a failed cell carries
// its error text and the run continues.
struct BenchRow {
  int model_id = 0;
  Index p = 0;
  Index n = 0;
  std::string solver;
  int rep = 0;
  bool warm = true;
  double wall_s = 0.0;  // includes factor construction, excludes generation
  double max_eta = 0.0;
  Index s_off_last = 0;
  bool ok = false;
  std::string error;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<std::string> notes;
};

BenchReport bench_protocol(const BenchSpec& spec);

// bench.csv (long format) and bench.txt (aligned mean|sd summary).
void save_bench(const std::string& dir, const BenchReport& report,
                const std::string& header_comment = "");

}  // namespace mars
