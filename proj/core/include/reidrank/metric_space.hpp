#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "reidrank/embedding_store.hpp"
#include "reidrank/matrix.hpp"

namespace reidrank {

inline constexpr double kPsdTolerance = 1e-9;

struct PsdReport {
  bool psd = false;
  double min_eigenvalue = 0.0;
  double max_asymmetry = 0.0;
};

/// Symmetry within 1e-9 and smallest eigenvalue >= -1e-9. Throws kNotSquare.
PsdReport psd_check(const Matrix& m);

enum class MetricKind { kEuclidean, kMahalanobis };

/// Distance configuration. A Mahalanobis config always holds a validated
/// PSD matrix; construction fails otherwise.
class MetricConfig {
 public:
  static MetricConfig euclidean() { return MetricConfig{}; }
  static MetricConfig mahalanobis(Matrix m);

  MetricKind kind() const noexcept { return kind_; }
  const std::optional<Matrix>& matrix() const noexcept { return matrix_; }

 private:
  MetricConfig() = default;

  MetricKind kind_ = MetricKind::kEuclidean;
  std::optional<Matrix> matrix_;
};

/// Probe-by-gallery distances, row-major. Entries are finite and >= 0.
using DistanceMatrix = Matrix;

/// ||a - b||_2, summed in double in component order.
double euclidean_distance(std::span<const float> a, std::span<const float> b);

/// Quadratic form (a - b)^T M (a - b); clamped at 0 against rounding.
double mahalanobis_quadratic(std::span<const float> a, std::span<const float> b,
                             const MetricConfig& config);

/// Distance under config: Euclidean norm or the Mahalanobis quadratic form.
double metric_distance(std::span<const float> a, std::span<const float> b,
                       const MetricConfig& config);

/// out[j] = metric_distance(query, set record j), computed exactly as
/// pairwise_matrix computes its entries.
void distance_row(std::span<const float> query, const EmbeddingSet& set,
                  const MetricConfig& config, std::span<double> out);

/// Entry (i, j) equals metric_distance(probe i, gallery j). Bitwise identical
/// for any thread count (0 = default).
DistanceMatrix pairwise_matrix(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                               const MetricConfig& config, unsigned threads = 0);

/// Index of the smallest distance; ties go to the lowest index.
std::size_t identify(std::span<const double> probe_row);

// Mahalanobis matrix file: "REIM" | u16 version | u32 side | side*side f64.
inline constexpr char kMatrixMagic[4] = {'R', 'E', 'I', 'M'};
inline constexpr std::uint16_t kMatrixVersion = 1;

std::size_t write_matrix(const Matrix& m, std::ostream& out);
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::filesystem::path& path);
void write_matrix_file(const Matrix& m, const std::filesystem::path& path);

}  // namespace reidrank
