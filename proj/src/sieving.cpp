#include "mars/sieving.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace mars {

std::vector<SparsityPattern::Pair> sieve_expand(
    const SparseSymMatrix& omega_mat, const CovarianceFactor& factor,
    double lambda, double eps, int cap, Index block_rows) {
  const auto& pattern = *omega_mat.pattern;
  const Index p = factor.p();
  const Index complement = p * p - pattern.symmetric_count();
  if (complement <= 0) return {};

  ResidualInfo info = residual_map(omega_mat, factor, lambda, block_rows);
  const double eps_abs = eps * (1.0 + info.h_norm + info.omega_norm);
  const double band = eps_abs / std::sqrt(2.0 * static_cast<double>(complement));

  struct Cand {
    double mag;
    SparsityPattern::Pair pos;
  };
  std::vector<Cand> cands;
  RowMat m = sparse_times_factor(omega_mat, factor.A);
  h_blocks(m, factor, block_rows, [&](Index r0, const Mat& hb) {
    for (Index r = 0; r < hb.rows(); ++r) {
      const int i = static_cast<int>(r0 + r);
      for (Index j = i; j < p; ++j) {
        const double mag = std::abs(hb(r, j));
        const double thr = (i == j) ? band : lambda + band;
        if (mag > thr && !pattern.contains(i, static_cast<int>(j))) {
          cands.push_back({mag, {i, static_cast<int>(j)}});
        }
      }
    }
  });
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.mag > b.mag || (a.mag == b.mag && a.pos < b.pos);
  });
  if (cap > 0 && static_cast<int>(cands.size()) > cap) cands.resize(cap);
  std::vector<SparsityPattern::Pair> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back(c.pos);
  return out;
}

namespace {

// Prox-polish restricted to the pattern: omega* = Prox_{lambda theta}(omega - h)
SparseSymMatrix polish(const SparseSymMatrix& omega_mat,
                       const CovarianceFactor& factor,
                       const ReducedVectors& rv, double lambda) {
  RowMat m = sparse_times_factor(omega_mat, factor.A);
  Vec hv = S_apply(m, factor, *omega_mat.pattern) - rv.e1;
  Vec out(omega_mat.omega.size());
  for (Index k = 0; k < out.size(); ++k) {
    const double g = omega_mat.omega[k] - hv[k];
    out[k] = (rv.e1[k] != 0.0)
                 ? g
                 : std::copysign(std::max(std::abs(g) - lambda, 0.0), g);
  }
  return SparseSymMatrix(omega_mat.pattern, std::move(out));
}

struct WarmState {
  PatternPtr pattern;
  Vec x;
  RowMat Y;
};

PathEntry solve_one(const CovarianceFactor& factor, double lambda_req,
                    double lam_max, const PathSpec& spec,
                    const StoppingPolicy& policy, const SsnConfig& cfg,
                    WarmState& state, std::vector<std::string>* notices) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  PathEntry entry;
  entry.lambda_requested = lambda_req;
  double lambda = lambda_req;
  if (lambda >= lam_max) {
    if (lambda > lam_max && notices) {
      notices->push_back("lambda " + std::to_string(lambda) +
                         " clamped to lambda_max " + std::to_string(lam_max));
    }
    entry.clamped = lambda > lam_max;
    lambda = std::min(lambda, lam_max);
    entry.lambda = lambda_req;  // the diagonal solution is optimal as-is
    entry.estimate = diagonal_solution(factor);
    ResidualInfo info =
        residual_map(entry.estimate, factor, lambda_req, spec.block_rows);
    entry.eta = info.eta;
    entry.objective = objective(entry.estimate, factor, lambda_req);
    // reset the warm state to the diagonal optimum
    state.pattern = entry.estimate.pattern;
    ReducedVectors rv = make_reduced_vectors(*state.pattern);
    state.x = entry.estimate.omega.cwiseProduct(rv.e4);
    state.Y = S_star(state.x, factor, *state.pattern, rv.e3);
    entry.wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    entry.s_off = entry.estimate.s_off();
    entry.s_bar_off = entry.estimate.s_off(1e-5);
    return entry;
  }

  entry.lambda = lambda;
  StoppingPolicy inner_policy = policy;
  inner_policy.outer_eta_tol = spec.eps / std::sqrt(2.0);

  ReducedVectors rv = make_reduced_vectors(*state.pattern);
  SparseSymMatrix omega(state.pattern, state.x.cwiseProduct(rv.e3));
  ResidualInfo info = residual_map(omega, factor, lambda, spec.block_rows);
  int rounds = 0;
  double expand_eps = spec.eps;
  int stall_retries = 0;
  while (info.eta > spec.eps) {
    if (rounds >= spec.max_sieve_rounds) {
      entry.converged = false;
      break;
    }
    auto J = sieve_expand(omega, factor, lambda, expand_eps, spec.sieve_cap,
                          spec.block_rows);
    if (!J.empty()) {
      PatternExpansion exp = expand_pattern(*state.pattern, J);
      Vec x_new = Vec::Zero(exp.pattern->t());
      for (Index k = 0; k < state.pattern->t(); ++k) {
        x_new[exp.old_to_new[k]] = state.x[k];
      }
      state.pattern = exp.pattern;
      state.x = std::move(x_new);
    } else if (stall_retries >= 8) {
      throw SieveStalled("sieving: eta above tolerance but no KKT violation");
    } else {
      // the pattern already covers the support (common under warm starts);
      // re-solve on it with a tighter inner tolerance and band
      ++stall_retries;
      inner_policy.outer_eta_tol *= 0.25;
      expand_eps *= 0.25;
    }

    PenalizedProblem problem{factor, lambda};
    AlmResult alm = alm_solve(problem, state.pattern, state.x, inner_policy,
                              cfg, std::move(state.Y));
    state.x = std::move(alm.x);
    state.Y = std::move(alm.Y);
    entry.max_alm_outer = std::max(entry.max_alm_outer, alm.outer_iters);
    ++rounds;

    rv = make_reduced_vectors(*state.pattern);
    omega = SparseSymMatrix(state.pattern, state.x.cwiseProduct(rv.e3));
    info = residual_map(omega, factor, lambda, spec.block_rows);
  }
  entry.sieve_rounds = rounds;

  SparseSymMatrix polished = polish(omega, factor, rv, lambda);
  ResidualInfo pinfo = residual_map(polished, factor, lambda, spec.block_rows);
  if (pinfo.eta <= info.eta) {
    entry.estimate = std::move(polished);
    entry.eta = pinfo.eta;
  } else {
    entry.estimate = std::move(omega);
    entry.eta = info.eta;
  }
  entry.converged = entry.converged && entry.eta <= spec.eps;
  entry.objective = objective(entry.estimate, factor, lambda);
  entry.s_off = entry.estimate.s_off();
  entry.s_bar_off = entry.estimate.s_off(1e-5);
  // warm start for the next lambda from the returned estimate
  state.x = entry.estimate.omega.cwiseProduct(rv.e4);
  entry.wall_ms =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return entry;
}

WarmState initial_state(const CovarianceFactor& factor) {
  WarmState state;
  SparseSymMatrix diag = diagonal_solution(factor);
  state.pattern = diag.pattern;
  ReducedVectors rv = make_reduced_vectors(*state.pattern);
  state.x = diag.omega.cwiseProduct(rv.e4);
  state.Y = S_star(state.x, factor, *state.pattern, rv.e3);
  return state;
}

}  // namespace

PathResult solve_path(const CovarianceFactor& factor, const PathSpec& spec,
                      const StoppingPolicy& policy, const SsnConfig& cfg) {
  for (size_t i = 0; i + 1 < spec.lambdas.size(); ++i) {
    if (!(spec.lambdas[i] > spec.lambdas[i + 1])) {
      throw SolverError("solve_path: lambdas must be strictly decreasing");
    }
  }
  if (!spec.lambdas.empty() && spec.lambdas.back() <= 0.0) {
    throw SolverError("solve_path: lambdas must be positive");
  }
  const double lam_max = lambda_max(factor, spec.block_rows);
  PathResult result;
  WarmState state = initial_state(factor);
  for (double lam : spec.lambdas) {
    result.entries.push_back(solve_one(factor, lam, lam_max, spec, policy, cfg,
                                       state, &result.notices));
  }
  return result;
}

PathEntry cold_solve(const CovarianceFactor& factor, double lambda, double eps,
                     const StoppingPolicy& policy, const SsnConfig& cfg) {
  PathSpec spec;
  spec.lambdas = {lambda};
  spec.eps = eps;
  WarmState state = initial_state(factor);
  const double lam_max = lambda_max(factor, spec.block_rows);
  return solve_one(factor, lambda, lam_max, spec, policy, cfg, state, nullptr);
}

void save_path(const std::string& dir, const PathResult& result,
               const std::string& header_comment) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "path.csv");
  if (!csv) throw SolverError("cannot open path.csv in " + dir);
  if (!header_comment.empty()) csv << "# " << header_comment << '\n';
  csv << "lambda,eta,objective,s_off,s_bar_off,rounds,wall_ms\n";
  int idx = 0;
  for (const auto& e : result.entries) {
    char name[64];
    std::snprintf(name, sizeof(name), "estimate_%03d.coord", idx);
    save_coord((fs::path(dir) / name).string(), e.estimate);
    csv << e.lambda_requested << ',' << e.eta << ',' << e.objective << ','
        << e.s_off << ',' << e.s_bar_off << ',' << e.sieve_rounds << ','
        << e.wall_ms << '\n';
    ++idx;
  }
}

}  // namespace mars
