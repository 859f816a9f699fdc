#include "reidrank/kreciprocal.hpp"

#include <algorithm>
#include <numeric>

#include "reidrank/error.hpp"
#include "reidrank/parallel.hpp"

namespace reidrank {
namespace {

using Neighbor = GalleryNeighborhood::Neighbor;

// Strict weak order on (distance, index): nearer first, then lower index.
constexpr bool nearer(const Neighbor& a, const Neighbor& b) noexcept {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

void check_k(std::size_t k, std::size_t joint_size) {
  if (k < 1 || k >= joint_size) {
    fail(ErrorCode::kOutOfRange, "k = " + std::to_string(k) + " must satisfy 1 <= k < " +
                                     std::to_string(joint_size) + " (joint point count)");
  }
}

void check_overlap(double overlap) {
  if (!(overlap > 0.0 && overlap <= 1.0)) {
    fail(ErrorCode::kOutOfRange,
         "expansion overlap " + std::to_string(overlap) + " must lie in (0, 1]");
  }
}

void require_square(const DistanceMatrix& m) {
  if (m.rows != m.cols) {
    fail(ErrorCode::kNotSquare, "joint distance matrix must be square, got " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
}

IndexSet sorted_indices(std::span<const Neighbor> neighbors) {
  IndexSet out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.index);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t intersection_size(const IndexSet& a, const IndexSet& b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

IndexSet expand_one(std::uint32_t self, const IndexSet& reciprocal,
                    const IndexSets& half_reciprocal, double overlap) {
  IndexSet result = reciprocal;
  for (std::uint32_t q : reciprocal) {
    const IndexSet& candidate = half_reciprocal[q];
    const auto shared = intersection_size(candidate, reciprocal);
    if (static_cast<double>(shared) >= overlap * static_cast<double>(candidate.size())) {
      IndexSet merged;
      merged.reserve(result.size() + candidate.size());
      std::set_union(result.begin(), result.end(), candidate.begin(), candidate.end(),
                     std::back_inserter(merged));
      result = std::move(merged);
    }
  }
  if (auto it = std::lower_bound(result.begin(), result.end(), self);
      it != result.end() && *it == self) {
    result.erase(it);
  }
  return result;
}

std::vector<std::vector<Neighbor>> top_lists(
    std::size_t count, std::size_t depth, unsigned threads,
    const std::function<void(std::size_t, std::vector<double>&)>& row_of) {
  std::vector<std::vector<Neighbor>> lists(count);
  parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row;
    std::vector<Neighbor> candidates;
    for (std::size_t g = begin; g < end; ++g) {
      row_of(g, row);
      candidates.clear();
      for (std::size_t h = 0; h < count; ++h) {
        if (h != g) candidates.push_back({row[h], static_cast<std::uint32_t>(h + 1)});
      }
      const std::size_t keep = std::min(depth, candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                        candidates.end(), nearer);
      lists[g].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
    }
  });
  return lists;
}

}  // namespace

void validate_params(const RerankParams& params, std::size_t joint_size) {
  check_k(params.k, joint_size);
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) {
    fail(ErrorCode::kOutOfRange, "lambda " + std::to_string(params.lambda) + " must lie in [0, 1]");
  }
  check_overlap(params.expansion_overlap);
}

IndexSets knn_sets(const DistanceMatrix& joint, std::size_t k) {
  require_square(joint);
  const std::size_t n = joint.rows;
  check_k(k, n);
  IndexSets out(n);
  std::vector<Neighbor> candidates;
  for (std::size_t p = 0; p < n; ++p) {
    candidates.clear();
    for (std::size_t q = 0; q < n; ++q) {
      if (q != p) candidates.push_back({joint(p, q), static_cast<std::uint32_t>(q)});
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), nearer);
    out[p] = sorted_indices({candidates.data(), k});
  }
  return out;
}

IndexSets reciprocal_sets(const IndexSets& knn) {
  IndexSets out(knn.size());
  for (std::size_t p = 0; p < knn.size(); ++p) {
    for (std::uint32_t q : knn[p]) {
      if (q >= knn.size()) fail(ErrorCode::kOutOfRange, "neighbor index out of range");
      if (std::binary_search(knn[q].begin(), knn[q].end(), static_cast<std::uint32_t>(p))) {
        out[p].push_back(q);
      }
    }
  }
  return out;
}

IndexSets expand_sets(const IndexSets& reciprocal, const IndexSets& half_reciprocal,
                      double overlap) {
  check_overlap(overlap);
  if (reciprocal.size() != half_reciprocal.size()) {
    fail(ErrorCode::kDimensionMismatch, "reciprocal and half-k reciprocal sets differ in size");
  }
  IndexSets out(reciprocal.size());
  for (std::size_t p = 0; p < reciprocal.size(); ++p) {
    out[p] = expand_one(static_cast<std::uint32_t>(p), reciprocal[p], half_reciprocal, overlap);
  }
  return out;
}

NeighborSets neighbor_sets(const DistanceMatrix& joint, const RerankParams& params) {
  require_square(joint);
  validate_params(params, joint.rows);
  NeighborSets sets;
  sets.knn = knn_sets(joint, params.k);
  sets.reciprocal = reciprocal_sets(sets.knn);
  const IndexSets half = reciprocal_sets(knn_sets(joint, half_k(params.k)));
  sets.expanded = expand_sets(sets.reciprocal, half, params.expansion_overlap);
  return sets;
}

double jaccard_distance(const IndexSet& a, const IndexSet& b) {
  const std::size_t shared = intersection_size(a, b);
  const std::size_t united = a.size() + b.size() - shared;
  if (united == 0) return 1.0;
  return 1.0 - static_cast<double>(shared) / static_cast<double>(united);
}

std::vector<double> min_max_normalize(std::span<const double> row) {
  std::vector<double> out(row.size(), 0.0);
  if (row.empty()) return out;
  const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - *lo) / span;
  return out;
}

std::vector<std::uint32_t> RankList::order() const {
  std::vector<std::uint32_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.gallery_index);
  return out;
}

RankList rank_by_distance(std::uint32_t probe_index, std::span<const double> row) {
  RankList list{probe_index, {}};
  list.entries.reserve(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    list.entries.push_back({static_cast<std::uint32_t>(j), row[j]});
  }
  std::sort(list.entries.begin(), list.entries.end(), [](const RankEntry& a, const RankEntry& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.gallery_index < b.gallery_index);
  });
  return list;
}

GalleryNeighborhood GalleryNeighborhood::build(const EmbeddingSet& gallery,
                                               const MetricConfig& metric, std::size_t k,
                                               unsigned threads) {
  GalleryNeighborhood hood;
  hood.k_ = k;
  hood.lists_ = top_lists(gallery.size(), k, threads, [&](std::size_t g, std::vector<double>& row) {
    row.resize(gallery.size());
    distance_row(gallery.records[g].vector, gallery, metric, row);
  });
  return hood;
}

GalleryNeighborhood GalleryNeighborhood::from_matrix(const DistanceMatrix& gallery_gallery,
                                                     std::size_t k, unsigned threads) {
  require_square(gallery_gallery);
  GalleryNeighborhood hood;
  hood.k_ = k;
  hood.lists_ = top_lists(gallery_gallery.rows, k, threads,
                          [&](std::size_t g, std::vector<double>& row) {
                            const auto src = gallery_gallery.row(g);
                            row.assign(src.begin(), src.end());
                          });
  return hood;
}

ProbeRerank rerank_probe(std::uint32_t probe_index, std::span<const double> probe_row,
                         const GalleryNeighborhood& gallery, const RerankParams& params,
                         ProbeTrace* trace) {
  const std::size_t K = gallery.gallery_size();
  if (probe_row.size() != K) {
    fail(ErrorCode::kDimensionMismatch, "probe row has " + std::to_string(probe_row.size()) +
                                            " distances for a gallery of " + std::to_string(K));
  }
  const std::size_t n = K + 1;
  validate_params(params, n);
  const std::size_t k = params.k;
  if (gallery.k() < std::min(k, K - 1)) {
    fail(ErrorCode::kOutOfRange, "gallery neighborhood was built for k = " +
                                     std::to_string(gallery.k()) + ", need " + std::to_string(k));
  }

  // Joint index 0 is the probe; gallery j is j + 1. Row x of `lists` holds
  // N(x, k) in nearest-first order.
  std::vector<Neighbor> lists(n * k);
  auto list_of = [&](std::size_t x) { return std::span<Neighbor>(lists.data() + x * k, k); };

  {
    std::vector<Neighbor> candidates(K);
    for (std::size_t g = 0; g < K; ++g) {
      candidates[g] = {probe_row[g], static_cast<std::uint32_t>(g + 1)};
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), nearer);
    std::copy_n(candidates.begin(), k, list_of(0).begin());
  }
  for (std::size_t g = 0; g < K; ++g) {
    const auto own = gallery.neighbors(g).first(std::min(k, K - 1));
    const Neighbor probe{probe_row[g], 0};
    auto out = list_of(g + 1);
    // Merge the probe into the gallery-only list and keep the first k.
    std::size_t src = 0;
    bool placed = false;
    for (std::size_t slot = 0; slot < k; ++slot) {
      if (!placed && (src == own.size() || nearer(probe, own[src]))) {
        out[slot] = probe;
        placed = true;
      } else {
        out[slot] = own[src++];
      }
    }
  }

  // x in N(q, depth) iff (D(q,x), x) does not come after q's depth-th neighbor.
  auto reciprocal_at = [&](std::size_t depth) {
    IndexSets sets(n);
    for (std::size_t x = 0; x < n; ++x) {
      const auto mine = list_of(x);
      for (std::size_t i = 0; i < depth; ++i) {
        const Neighbor& nb = mine[i];
        const Neighbor back{nb.distance, static_cast<std::uint32_t>(x)};
        if (!nearer(list_of(nb.index)[depth - 1], back)) sets[x].push_back(nb.index);
      }
      std::sort(sets[x].begin(), sets[x].end());
    }
    return sets;
  };

  IndexSets reciprocal = reciprocal_at(k);
  const IndexSets half = reciprocal_at(half_k(k));
  IndexSets expanded(n);
  for (std::size_t x = 0; x < n; ++x) {
    expanded[x] = expand_one(static_cast<std::uint32_t>(x), reciprocal[x], half,
                             params.expansion_overlap);
  }

  std::vector<double> jaccard(K);
  for (std::size_t g = 0; g < K; ++g) jaccard[g] = jaccard_distance(expanded[0], expanded[g + 1]);
  std::vector<double> normalized = min_max_normalize(probe_row);
  std::vector<double> blended(K);
  for (std::size_t g = 0; g < K; ++g) {
    blended[g] = blended_distance(normalized[g], jaccard[g], params.lambda);
  }

  ProbeRerank result{rank_by_distance(probe_index, probe_row),
                     rank_by_distance(probe_index, blended)};

  if (trace != nullptr) {
    trace->neighbors.knn.resize(n);
    for (std::size_t x = 0; x < n; ++x) trace->neighbors.knn[x] = sorted_indices(list_of(x));
    trace->neighbors.reciprocal = std::move(reciprocal);
    trace->neighbors.expanded = std::move(expanded);
    trace->original.assign(probe_row.begin(), probe_row.end());
    trace->normalized = std::move(normalized);
    trace->jaccard = std::move(jaccard);
    trace->blended = std::move(blended);
  }
  return result;
}

namespace {

RerankResult rerank_rows(std::size_t probe_count, std::size_t gallery_size,
                         const GalleryNeighborhood& hood, const RerankParams& params,
                         const RerankOptions& options,
                         const std::function<void(std::size_t, std::vector<double>&)>& row_of) {
  RerankResult result;
  result.initial.resize(probe_count);
  result.reranked.resize(probe_count);
  if (options.keep_trace) result.traces.resize(probe_count);
  parallel_for(probe_count, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(gallery_size);
    for (std::size_t p = begin; p < end; ++p) {
      row_of(p, row);
      auto one = rerank_probe(static_cast<std::uint32_t>(p), row, hood, params,
                              options.keep_trace ? &result.traces[p] : nullptr);
      result.initial[p] = std::move(one.initial);
      result.reranked[p] = std::move(one.reranked);
    }
  });
  return result;
}

}  // namespace

RerankResult rerank(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                    const MetricConfig& metric, const RerankParams& params,
                    const RerankOptions& options) {
  if (probes.dimension != gallery.dimension) {
    fail(ErrorCode::kDimensionMismatch, "probe dimension " + std::to_string(probes.dimension) +
                                            " differs from gallery dimension " +
                                            std::to_string(gallery.dimension));
  }
  validate_params(params, gallery.size() + 1);
  const auto hood = GalleryNeighborhood::build(gallery, metric, params.k, options.threads);
  return rerank_rows(probes.size(), gallery.size(), hood, params, options,
                     [&](std::size_t p, std::vector<double>& row) {
                       distance_row(probes.records[p].vector, gallery, metric, row);
                     });
}

RerankResult rerank_matrices(const DistanceMatrix& probe_gallery,
                             const DistanceMatrix& gallery_gallery, const RerankParams& params,
                             const RerankOptions& options) {
  require_square(gallery_gallery);
  if (probe_gallery.cols != gallery_gallery.rows) {
    fail(ErrorCode::kDimensionMismatch, "probe-gallery matrix has " +
                                            std::to_string(probe_gallery.cols) +
                                            " columns for a gallery of " +
                                            std::to_string(gallery_gallery.rows));
  }
  validate_params(params, gallery_gallery.rows + 1);
  const auto hood = GalleryNeighborhood::from_matrix(gallery_gallery, params.k, options.threads);
  return rerank_rows(probe_gallery.rows, probe_gallery.cols, hood, params, options,
                     [&](std::size_t p, std::vector<double>& row) {
                       const auto src = probe_gallery.row(p);
                       row.assign(src.begin(), src.end());
                     });
}

std::vector<RankList> initial_rank_lists(const DistanceMatrix& probe_gallery) {
  std::vector<RankList> lists;
  lists.reserve(probe_gallery.rows);
  for (std::size_t p = 0; p < probe_gallery.rows; ++p) {
    lists.push_back(rank_by_distance(static_cast<std::uint32_t>(p), probe_gallery.row(p)));
  }
  return lists;
}

}  // namespace reidrank
