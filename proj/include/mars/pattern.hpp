#pragma once

#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

#include "mars/linalg.hpp"

namespace mars {

// Active index set I(lambda) as upper-triangle positions (i <= j), sorted
// row-major. All p diagonal positions are always present. Immutable once
// built; sieving produces a new pattern plus an injection map.
class SparsityPattern {
 public:
  using Pair = std::pair<int, int>;

  // `pairs` may be unsorted and may omit diagonals; they are added.
  SparsityPattern(Index p, std::vector<Pair> pairs);

  static SparsityPattern full(Index p);
  static SparsityPattern diagonal(Index p);

  Index p() const { return p_; }
  Index t() const { return static_cast<Index>(kept_.size()); }
  const std::vector<Pair>& kept() const { return kept_; }
  bool is_diag(Index k) const { return kept_[k].first == kept_[k].second; }

  // Position of (i,j) (i <= j required) in kept order, or -1.
  Index index_of(int i, int j) const;
  bool contains(int i, int j) const { return index_of(i, j) >= 0; }

  // |I| counting symmetric pairs twice, so t = (|I| + p) / 2.
  Index symmetric_count() const { return 2 * t() - p_; }

 private:
  Index p_;
  std::vector<Pair> kept_;
};

using PatternPtr = std::shared_ptr<const SparsityPattern>;

struct PatternExpansion {
  PatternPtr pattern;
  // old kept index -> new kept index
  std::vector<Index> old_to_new;
};

// Union of `base` with additional upper-triangle positions.
PatternExpansion expand_pattern(const SparsityPattern& base,
                                const std::vector<SparsityPattern::Pair>& add);

// Constant vectors of the reduced space: e1 indicates diagonals, e2 is 2 on
// off-diagonals, e3 = e1 + e2/4 and e4 = e1 + e2 (so e3 o e4 = 1).
struct ReducedVectors {
  Vec e1, e2, e3, e4;
};

ReducedVectors make_reduced_vectors(const SparsityPattern& pattern);

// Symmetric p x p matrix stored as (pattern, upper-triangle values).
struct SparseSymMatrix {
  PatternPtr pattern;
  Vec omega;  // length pattern->t(), kept order

  SparseSymMatrix() = default;
  SparseSymMatrix(PatternPtr pat, Vec values);

  Index p() const { return pattern->p(); }
  Mat to_dense() const;
  double trace() const;
  // Frobenius norm of the represented symmetric matrix.
  double frobenius_norm() const;
  // Off-diagonal nonzero count over the full matrix (both triangles).
  Index s_off(double threshold = 0.0) const;
};

// Coordinate text format: header "p t", then "i j value" (1-based, upper
// triangle). Values round-trip bit-exactly via shortest decimal floats.
void write_coord(std::ostream& os, const SparseSymMatrix& m);
SparseSymMatrix read_coord(std::istream& is);
void save_coord(const std::string& path, const SparseSymMatrix& m);
SparseSymMatrix load_coord(const std::string& path);

}  // namespace mars
