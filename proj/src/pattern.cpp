#include "mars/pattern.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mars/errors.hpp"

namespace mars {

SparsityPattern::SparsityPattern(Index p, std::vector<Pair> pairs) : p_(p) {
  for (auto& [i, j] : pairs) {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= p) {
      throw DimensionMismatch("SparsityPattern: position out of range");
    }
  }
  for (int i = 0; i < p; ++i) pairs.emplace_back(i, i);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  kept_ = std::move(pairs);
}

SparsityPattern SparsityPattern::full(Index p) {
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<size_t>(p) * (p + 1) / 2);
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) pairs.emplace_back(i, j);
  }
  return SparsityPattern(p, std::move(pairs));
}

SparsityPattern SparsityPattern::diagonal(Index p) {
  return SparsityPattern(p, {});
}

Index SparsityPattern::index_of(int i, int j) const {
  auto it = std::lower_bound(kept_.begin(), kept_.end(), Pair{i, j});
  if (it == kept_.end() || *it != Pair{i, j}) return -1;
  return it - kept_.begin();
}

PatternExpansion expand_pattern(
    const SparsityPattern& base,
    const std::vector<SparsityPattern::Pair>& add) {
  std::vector<SparsityPattern::Pair> pairs = base.kept();
  pairs.insert(pairs.end(), add.begin(), add.end());
  auto merged =
      std::make_shared<const SparsityPattern>(base.p(), std::move(pairs));
  std::vector<Index> map(base.t());
  for (Index k = 0; k < base.t(); ++k) {
    map[k] = merged->index_of(base.kept()[k].first, base.kept()[k].second);
  }
  return {merged, std::move(map)};
}

ReducedVectors make_reduced_vectors(const SparsityPattern& pattern) {
  const Index t = pattern.t();
  ReducedVectors rv;
  rv.e1 = Vec::Zero(t);
  rv.e2 = Vec::Zero(t);
  for (Index k = 0; k < t; ++k) {
    if (pattern.is_diag(k)) {
      rv.e1[k] = 1.0;
    } else {
      rv.e2[k] = 2.0;
    }
  }
  rv.e3 = rv.e1 + rv.e2 / 4.0;
  rv.e4 = rv.e1 + rv.e2;
  return rv;
}

SparseSymMatrix::SparseSymMatrix(PatternPtr pat, Vec values)
    : pattern(std::move(pat)), omega(std::move(values)) {
  if (omega.size() != pattern->t()) {
    throw DimensionMismatch("SparseSymMatrix: value length != pattern t");
  }
}

Mat SparseSymMatrix::to_dense() const {
  Mat m = Mat::Zero(p(), p());
  const auto& kept = pattern->kept();
  for (Index k = 0; k < pattern->t(); ++k) {
    auto [i, j] = kept[k];
    m(i, j) = omega[k];
    m(j, i) = omega[k];
  }
  return m;
}

double SparseSymMatrix::trace() const {
  double s = 0.0;
  for (Index k = 0; k < pattern->t(); ++k) {
    if (pattern->is_diag(k)) s += omega[k];
  }
  return s;
}

double SparseSymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (Index k = 0; k < pattern->t(); ++k) {
    const double w = pattern->is_diag(k) ? 1.0 : 2.0;
    s += w * omega[k] * omega[k];
  }
  return std::sqrt(s);
}

Index SparseSymMatrix::s_off(double threshold) const {
  Index count = 0;
  for (Index k = 0; k < pattern->t(); ++k) {
    if (!pattern->is_diag(k) && std::abs(omega[k]) > threshold) count += 2;
  }
  return count;
}

void write_coord(std::ostream& os, const SparseSymMatrix& m) {
  os << m.p() << ' ' << m.pattern->t() << '\n';
  char buf[32];
  const auto& kept = m.pattern->kept();
  for (Index k = 0; k < m.pattern->t(); ++k) {
    auto [i, j] = kept[k];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), m.omega[k]);
    (void)ec;
    os << (i + 1) << ' ' << (j + 1) << ' '
       << std::string_view(buf, end - buf) << '\n';
  }
}

SparseSymMatrix read_coord(std::istream& is) {
  // leading '#' comment lines (file provenance headers) are skipped
  std::string line;
  do {
    if (!std::getline(is, line)) throw ParseError("coord: bad header");
  } while (line.empty() || line[0] == '#');
  Index p = 0, t = 0;
  std::istringstream header(line);
  if (!(header >> p >> t)) throw ParseError("coord: bad header");
  std::vector<SparsityPattern::Pair> pairs;
  std::vector<double> values;
  pairs.reserve(t);
  values.reserve(t);
  for (Index k = 0; k < t; ++k) {
    int i = 0, j = 0;
    std::string tok;
    if (!(is >> i >> j >> tok)) {
      throw ParseError("coord: truncated at entry " + std::to_string(k + 1));
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("coord: bad value '" + tok + "'");
    }
    pairs.emplace_back(i - 1, j - 1);
    values.push_back(v);
  }
  // Entries may omit zero diagonals; rebuild values in kept order.
  auto pattern = std::make_shared<const SparsityPattern>(p, pairs);
  Vec omega = Vec::Zero(pattern->t());
  for (size_t k = 0; k < pairs.size(); ++k) {
    int i = pairs[k].first, j = pairs[k].second;
    if (i > j) std::swap(i, j);
    omega[pattern->index_of(i, j)] = values[k];
  }
  return SparseSymMatrix(pattern, std::move(omega));
}

void save_coord(const std::string& path, const SparseSymMatrix& m) {
  std::ofstream os(path);
  if (!os) throw SolverError("cannot open " + path + " for writing");
  write_coord(os, m);
}

SparseSymMatrix load_coord(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SolverError("cannot open " + path);
  return read_coord(is);
}

}  // namespace mars
