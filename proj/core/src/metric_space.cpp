#include "reidrank/metric_space.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "reidrank/error.hpp"
#include "reidrank/parallel.hpp"

namespace reidrank {

PsdReport psd_check(const Matrix& m) {
  if (m.rows != m.cols) {
    fail(ErrorCode::kNotSquare, "matrix is " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols) + ", expected square");
  }
  PsdReport report;
  const std::size_t n = m.rows;
  if (n == 0) {
    report.psd = true;
    return report;
  }
  if (!std::all_of(m.values.begin(), m.values.end(), [](double v) { return std::isfinite(v); })) {
    report.min_eigenvalue = std::nan("");
    return report;
  }

  Eigen::MatrixXd sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      report.max_asymmetry = std::max(report.max_asymmetry, std::abs(m(i, j) - m(j, i)));
      sym(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * (m(i, j) + m(j, i));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  report.min_eigenvalue = solver.eigenvalues().minCoeff();
  report.psd = report.max_asymmetry <= kPsdTolerance && report.min_eigenvalue >= -kPsdTolerance;
  return report;
}

MetricConfig MetricConfig::mahalanobis(Matrix m) {
  const PsdReport report = psd_check(m);
  if (m.rows == 0) fail(ErrorCode::kNotSquare, "Mahalanobis matrix is empty");
  if (!report.psd) {
    fail(ErrorCode::kNotPsd,
         "Mahalanobis matrix is not symmetric positive semidefinite (asymmetry " +
             std::to_string(report.max_asymmetry) + ", min eigenvalue " +
             std::to_string(report.min_eigenvalue) + ")");
  }
  MetricConfig config;
  config.kind_ = MetricKind::kMahalanobis;
  config.matrix_ = std::move(m);
  return config;
}

namespace {

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::kDimensionMismatch,
         "dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

double squared_norm_of_difference(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

// Caller has checked sizes. Summation order is fixed: rows outer, columns inner.
double quadratic_form(std::span<const float> a, std::span<const float> b, const Matrix& m,
                      std::vector<double>& diff) {
  const std::size_t n = a.size();
  diff.resize(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = static_cast<double>(a[i]) - static_cast<double>(b[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = m.values.data() + i * n;
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += row[j] * diff[j];
    total += diff[i] * inner;
  }
  return std::max(total, 0.0);
}

const Matrix& mahalanobis_matrix(const MetricConfig& config) {
  if (config.kind() != MetricKind::kMahalanobis || !config.matrix()) {
    fail(ErrorCode::kInvalidSet, "metric config carries no Mahalanobis matrix");
  }
  return *config.matrix();
}

}  // namespace

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  require_same_size(a.size(), b.size());
  return std::sqrt(squared_norm_of_difference(a, b));
}

double mahalanobis_quadratic(std::span<const float> a, std::span<const float> b,
                             const MetricConfig& config) {
  const Matrix& m = mahalanobis_matrix(config);
  require_same_size(a.size(), b.size());
  require_same_size(a.size(), m.rows);
  std::vector<double> diff;
  return quadratic_form(a, b, m, diff);
}

double metric_distance(std::span<const float> a, std::span<const float> b,
                       const MetricConfig& config) {
  return config.kind() == MetricKind::kEuclidean ? euclidean_distance(a, b)
                                                 : mahalanobis_quadratic(a, b, config);
}

namespace {

void check_set(const EmbeddingSet& set, const Matrix* m) {
  for (const auto& r : set.records) require_same_size(r.vector.size(), set.dimension);
  if (m != nullptr) require_same_size(set.dimension, m->rows);
}

const Matrix* matrix_or_null(const MetricConfig& config) {
  return config.kind() == MetricKind::kMahalanobis ? &mahalanobis_matrix(config) : nullptr;
}

void fill_row(std::span<const float> query, const EmbeddingSet& set, const Matrix* m,
              std::span<double> out, std::vector<double>& diff) {
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& g = set.records[j].vector;
    out[j] = m == nullptr ? std::sqrt(squared_norm_of_difference(query, g))
                          : quadratic_form(query, g, *m, diff);
  }
}

}  // namespace

void distance_row(std::span<const float> query, const EmbeddingSet& set,
                  const MetricConfig& config, std::span<double> out) {
  const Matrix* m = matrix_or_null(config);
  require_same_size(query.size(), set.dimension);
  check_set(set, m);
  require_same_size(out.size(), set.size());
  std::vector<double> diff;
  fill_row(query, set, m, out, diff);
}

DistanceMatrix pairwise_matrix(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                               const MetricConfig& config, unsigned threads) {
  require_same_size(probes.dimension, gallery.dimension);
  const Matrix* m = matrix_or_null(config);
  check_set(probes, m);
  check_set(gallery, m);

  DistanceMatrix out(probes.size(), gallery.size());
  parallel_for(probes.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> diff;
    for (std::size_t i = begin; i < end; ++i) {
      fill_row(probes.records[i].vector, gallery, m,
               {out.values.data() + i * out.cols, out.cols}, diff);
    }
  });
  return out;
}

std::size_t identify(std::span<const double> probe_row) {
  if (probe_row.empty()) fail(ErrorCode::kEmptyInput, "cannot identify against an empty gallery");
  std::size_t best = 0;
  for (std::size_t j = 1; j < probe_row.size(); ++j) {
    if (probe_row[j] < probe_row[best]) best = j;
  }
  return best;
}

std::size_t write_matrix(const Matrix& m, std::ostream& out) {
  if (m.rows != m.cols) fail(ErrorCode::kNotSquare, "only square matrices can be written");
  std::string buf(kMatrixMagic, 4);
  auto put = [&buf](std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put(kMatrixVersion, 2);
  put(m.rows, 4);
  for (double v : m.values) put(std::bit_cast<std::uint64_t>(v), 8);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::kIo, "write to matrix sink failed");
  return buf.size();
}

Matrix read_matrix(std::istream& in) {
  auto read_le = [&in](int width, const char* what) {
    std::array<unsigned char, 8> raw{};
    in.read(reinterpret_cast<char*>(raw.data()), width);
    if (in.gcount() != width) {
      fail(ErrorCode::kTruncated, std::string("truncated matrix while reading ") + what);
    }
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | raw[static_cast<std::size_t>(i)];
    return v;
  };

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) fail(ErrorCode::kTruncated, "truncated matrix while reading magic");
  if (std::memcmp(magic, kMatrixMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "bad magic bytes (expected \"REIM\")");
  }
  const auto version = read_le(2, "version");
  if (version != kMatrixVersion) {
    fail(ErrorCode::kUnsupportedVersion, "unsupported matrix version " + std::to_string(version));
  }
  const auto side = static_cast<std::size_t>(read_le(4, "side"));
  if (side == 0) fail(ErrorCode::kZeroDimension, "matrix side is 0");

  Matrix m;
  m.rows = m.cols = side;
  m.values.reserve(std::min<std::size_t>(side * side, 1u << 20));
  for (std::size_t i = 0; i < side * side; ++i) {
    const double v = std::bit_cast<double>(read_le(8, "entries"));
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "matrix has a non-finite entry");
    m.values.push_back(v);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::kTrailingData, "unexpected bytes after matrix entries");
  }
  return m;
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return read_matrix(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_matrix_file(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_matrix(m, out);
}

}  // namespace reidrank
