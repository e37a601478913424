#pragma once

#include <stdexcept>
#include <string>

namespace mars {

// Base for every failure the library reports; CLI maps these to exit code 1.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cholesky hit a non-positive pivot; the input matrix is not PD.
struct NotPositiveDefinite : SolverError {
  using SolverError::SolverError;
};

// CG saw a non-positive curvature term beyond round-off; the operator is
// not PSD, which means a bug upstream.
struct BreakdownDetected : SolverError {
  using SolverError::SolverError;
};

// A variable has (numerically) zero sample variance.
struct DegenerateVariable : SolverError {
  using SolverError::SolverError;
};

// Model dimension rules violated (Model 3 divisibility, Model 5 square p).
struct InvalidDimension : SolverError {
  using SolverError::SolverError;
};

struct DimensionMismatch : SolverError {
  using SolverError::SolverError;
};

struct ParseError : SolverError {
  using SolverError::SolverError;
};

struct RaggedRows : ParseError {
  using ParseError::ParseError;
};

// A dense baseline was asked for a p beyond its configured memory cap.
struct MemoryCapExceeded : SolverError {
  using SolverError::SolverError;
};

// A sieve round added no position while the residual is still above the
// tolerance; indicates inconsistent tolerances.
struct SieveStalled : SolverError {
  using SolverError::SolverError;
};

// Armijo backtracking exceeded its iteration cap; gradient and value
// disagree, which means a bug.
struct LineSearchStalled : SolverError {
  using SolverError::SolverError;
};

}  // namespace mars
