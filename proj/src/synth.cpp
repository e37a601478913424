#include "mars/synth.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

namespace mars {

namespace {

Index exact_sqrt(Index p) {
  const Index r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(p))));
  return (r * r == p) ? r : -1;
}

// Portable standard normals: Box-Muller over mt19937_64, one stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1)
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform01() { return (rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace

Mat build_theta(const ModelSpec& spec) {
  const Index p = spec.p;
  if (p <= 0) throw InvalidDimension("build_theta: p must be positive");
  Mat theta = Mat::Zero(p, p);
  switch (spec.model_id) {
    case 1:
    case 2: {
      const Index band = spec.model_id == 1 ? 2 : 4;
      for (Index i = 0; i < p; ++i) {
        theta(i, i) = 1.0;
        for (Index j = i + 1; j < std::min(p, i + band + 1); ++j) {
          theta(i, j) = theta(j, i) = 0.2;
        }
      }
      break;
    }
    case 3: {
      if (p % 5 != 0) {
        throw InvalidDimension("build_theta: model 3 needs p divisible by 5");
      }
      for (Index b = 0; b < p; b += 5) {
        for (Index i = 0; i < 5; ++i) {
          theta(b + i, b + i) = 1.0;
          for (Index j = i + 1; j < 5; ++j) {
            theta(b + i, b + j) = theta(b + j, b + i) = 0.2;
          }
        }
      }
      break;
    }
    case 4: {
      for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
          theta(i, j) = std::pow(0.2, std::abs(static_cast<double>(i - j)));
        }
      }
      break;
    }
    case 5: {
      const Index r = exact_sqrt(p);
      if (r < 0) {
        throw InvalidDimension("build_theta: model 5 needs p a perfect square");
      }
      theta.diagonal().setOnes();
      // 1-based rules: (i, i+1) unless i is a multiple of sqrt(p); (i, i+sqrt(p))
      for (Index i1 = 1; i1 <= p; ++i1) {
        if (i1 % r != 0 && i1 + 1 <= p) {
          theta(i1 - 1, i1) = theta(i1, i1 - 1) = 0.2;
        }
        if (i1 + r <= p) {
          theta(i1 - 1, i1 + r - 1) = theta(i1 + r - 1, i1 - 1) = 0.2;
        }
      }
      break;
    }
    default:
      throw InvalidDimension("build_theta: model_id must be 1..5");
  }
  return theta;
}

Dataset sample_gaussian(const Mat& theta, Index n, std::uint64_t seed) {
  if (theta.rows() != theta.cols()) {
    throw DimensionMismatch("sample_gaussian: theta must be square");
  }
  const Index p = theta.rows();
  const Mat l = cholesky(theta);  // throws NotPositiveDefinite
  NormalStream normals(seed);
  Dataset data;
  data.X = Mat(n, p);
  Vec z(p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) z[j] = normals.next();
    // x solves L^T x = z, so Cov(x) = (L L^T)^{-1} = Theta^{-1}
    data.X.row(i) =
        l.transpose().triangularView<Eigen::Upper>().solve(z).transpose();
  }
  data.truth = theta;
  return data;
}

Dataset generate(const ModelSpec& spec) {
  return sample_gaussian(build_theta(spec), spec.n, spec.seed);
}

void standardize(Dataset& data) {
  const Index n = data.n();
  if (n < 2) throw InvalidDimension("standardize: need at least 2 samples");
  for (Index j = 0; j < data.p(); ++j) {
    auto col = data.X.col(j);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd <= 1e-300) {
      throw DegenerateVariable("standardize: column " + std::to_string(j + 1) +
                               " is constant");
    }
    col /= sd;
  }
  data.standardized = true;
}

CovarianceFactor make_factor(const Dataset& data) {
  const Index n = data.n();
  if (n < 2) throw InvalidDimension("make_factor: need at least 2 samples");
  Mat xc = data.X;
  for (Index j = 0; j < data.p(); ++j) {
    xc.col(j).array() -= xc.col(j).mean();
  }
  CovarianceFactor factor;
  factor.A = RowMat(xc.transpose() / std::sqrt(static_cast<double>(n)));
  return factor;
}

Dataset load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  std::vector<std::vector<double>> rows;
  Index cols = -1;
  Index lineno = 0;
  Index datarow = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (has_header && lineno == 1) continue;
    if (line.empty() || line[0] == '#') continue;
    ++datarow;
    std::vector<double> row;
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    Index col = 0;
    while (ptr <= end) {
      const char* stop = ptr;
      while (stop < end && *stop != ',') ++stop;
      ++col;
      // trim blanks around the cell
      const char* a = ptr;
      const char* b = stop;
      while (a < b && (*a == ' ' || *a == '\t' || *a == '\r')) ++a;
      while (b > a && (*(b - 1) == ' ' || *(b - 1) == '\t' || *(b - 1) == '\r')) --b;
      double v = 0.0;
      auto [p_end, ec] = std::from_chars(a, b, v);
      if (ec != std::errc() || p_end != b || !std::isfinite(v)) {
        throw ParseError(path + ": bad value at row " + std::to_string(datarow) +
                         ", column " + std::to_string(col));
      }
      row.push_back(v);
      if (stop == end) break;
      ptr = stop + 1;
    }
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
    } else if (static_cast<Index>(row.size()) != cols) {
      throw RaggedRows(path + ": row " + std::to_string(datarow) + " has " +
                       std::to_string(row.size()) + " columns, expected " +
                       std::to_string(cols));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Dataset data;
  data.X = Mat(static_cast<Index>(rows.size()), cols);
  for (Index i = 0; i < data.X.rows(); ++i) {
    for (Index j = 0; j < cols; ++j) data.X(i, j) = rows[i][j];
  }
  return data;
}

void save_csv(const std::string& path, const Mat& x,
              const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw SolverError("cannot open " + path + " for writing");
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  char buf[64];
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x(i, j));
      (void)ec;
      if (j) out << ',';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace mars
