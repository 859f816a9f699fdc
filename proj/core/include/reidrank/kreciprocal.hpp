#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reidrank/embedding_store.hpp"
#include "reidrank/metric_space.hpp"

namespace reidrank {

/// Sorted ascending, duplicate-free point indices.
using IndexSet = std::vector<std::uint32_t>;
using IndexSets = std::vector<IndexSet>;

struct RerankParams {
  std::size_t k = 20;
  double lambda = 0.3;
  double expansion_overlap = 2.0 / 3.0;
};

/// Throws kOutOfRange unless 1 <= k < joint_size, lambda in [0,1] and
/// overlap in (0,1].
void validate_params(const RerankParams& params, std::size_t joint_size);

/// floor(k/2), at least 1.
constexpr std::size_t half_k(std::size_t k) noexcept { return k / 2 > 0 ? k / 2 : 1; }

/// k nearest neighbors of each point of a square joint matrix, self excluded,
/// ties to the lower index. Requires 1 <= k < n.
IndexSets knn_sets(const DistanceMatrix& joint, std::size_t k);

/// R(p) = { q in N(p) : p in N(q) }.
IndexSets reciprocal_sets(const IndexSets& knn);

/// R*(p) = R(p) united with every R_half(q), q in R(p), for which
/// |R_half(q) & R(p)| >= overlap * |R_half(q)|. p itself is never added.
IndexSets expand_sets(const IndexSets& reciprocal, const IndexSets& half_reciprocal,
                      double overlap);

struct NeighborSets {
  IndexSets knn;
  IndexSets reciprocal;
  IndexSets expanded;
};

/// N, R and R* over a square joint matrix.
NeighborSets neighbor_sets(const DistanceMatrix& joint, const RerankParams& params);

/// 1 - |a & b| / |a | b|; defined as 1 when both sets are empty.
double jaccard_distance(const IndexSet& a, const IndexSet& b);

/// (1 - lambda) * d_jaccard + lambda * d_original.
constexpr double blended_distance(double d_original, double d_jaccard, double lambda) noexcept {
  return (1.0 - lambda) * d_jaccard + lambda * d_original;
}

/// (d - min) / (max - min); all zeros when the row is constant.
std::vector<double> min_max_normalize(std::span<const double> row);

struct RankEntry {
  std::uint32_t gallery_index = 0;
  double distance = 0.0;

  bool operator==(const RankEntry&) const = default;
};

/// One probe's gallery ordering: ascending distance, ties by gallery index.
struct RankList {
  std::uint32_t probe_index = 0;
  std::vector<RankEntry> entries;

  std::vector<std::uint32_t> order() const;
  bool operator==(const RankList&) const = default;
};

RankList rank_by_distance(std::uint32_t probe_index, std::span<const double> row);

/// Top-k neighbor lists of every gallery point among the other gallery
/// points. Built once and shared read-only by every probe.
class GalleryNeighborhood {
 public:
  struct Neighbor {
    double distance;
    std::uint32_t index;  // joint index: gallery j is j + 1, the probe is 0
  };

  static GalleryNeighborhood build(const EmbeddingSet& gallery, const MetricConfig& metric,
                                   std::size_t k, unsigned threads = 0);
  static GalleryNeighborhood from_matrix(const DistanceMatrix& gallery_gallery, std::size_t k,
                                         unsigned threads = 0);

  std::size_t gallery_size() const noexcept { return lists_.size(); }
  std::size_t k() const noexcept { return k_; }
  std::span<const Neighbor> neighbors(std::size_t gallery_index) const {
    return lists_[gallery_index];
  }

 private:
  std::size_t k_ = 0;
  std::vector<std::vector<Neighbor>> lists_;
};

/// Per-probe intermediate values. Indices are joint indices: 0 is the probe,
/// gallery j is j + 1.
struct ProbeTrace {
  NeighborSets neighbors;
  std::vector<double> original;    // raw probe-to-gallery distances
  std::vector<double> normalized;  // min-max normalized original
  std::vector<double> jaccard;     // d_J(R*(probe), R*(gallery j))
  std::vector<double> blended;
};

struct ProbeRerank {
  RankList initial;
  RankList reranked;
};

/// Re-ranks one probe given its distance row to the gallery. The joint
/// neighborhood is the probe plus the gallery.
ProbeRerank rerank_probe(std::uint32_t probe_index, std::span<const double> probe_row,
                         const GalleryNeighborhood& gallery, const RerankParams& params,
                         ProbeTrace* trace = nullptr);

struct RerankOptions {
  unsigned threads = 0;
  bool keep_trace = false;
};

struct RerankResult {
  std::vector<RankList> initial;
  std::vector<RankList> reranked;
  std::vector<ProbeTrace> traces;  // filled only with keep_trace
};

RerankResult rerank(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                    const MetricConfig& metric, const RerankParams& params,
                    const RerankOptions& options = {});

/// Same pipeline over precomputed probe-gallery and gallery-gallery matrices.
RerankResult rerank_matrices(const DistanceMatrix& probe_gallery,
                             const DistanceMatrix& gallery_gallery, const RerankParams& params,
                             const RerankOptions& options = {});

/// Initial ranking only.
std::vector<RankList> initial_rank_lists(const DistanceMatrix& probe_gallery);

}  // namespace reidrank
