#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "reidrank/embedding_store.hpp"
#include "reidrank/kreciprocal.hpp"

namespace reidrank {

/// Relevant gallery items for one probe, and items excluded from scoring.
/// The two sets are disjoint.
struct GroundTruth {
  IndexSet relevant;
  IndexSet junk;
};

/// Relevant = same person label. With junk_filter, same-label items seen by
/// the probe's own camera move to the junk set. Throws kNoRelevant when a
/// probe is left without relevant items.
std::vector<GroundTruth> build_ground_truth(const EmbeddingSet& probes,
                                            const EmbeddingSet& gallery, bool junk_filter);

/// 1-based rank of the first relevant item once junk is skipped.
std::optional<std::size_t> first_hit_rank(std::span<const std::uint32_t> ranked,
                                          const GroundTruth& truth);

/// Mean over relevant items of precision at that item's rank, junk removed.
/// Throws kNoRelevant on an empty relevant set and kInvalidSet when ranked is
/// not a permutation.
double average_precision(std::span<const std::uint32_t> ranked, const GroundTruth& truth);
double average_precision(const RankList& ranked, const GroundTruth& truth);

/// CMC(r) for r = 1..max_rank: fraction of probes whose first hit is at rank <= r.
std::vector<double> cmc_curve(std::span<const RankList> lists,
                              std::span<const GroundTruth> truths, std::size_t max_rank);

double mean_ap(std::span<const double> per_probe_ap);

struct EvalReport {
  std::vector<double> cmc;
  double map = 0.0;
  std::vector<double> per_probe_ap;
  std::size_t probe_count = 0;
};

/// max_rank 0 means the longest rank list.
EvalReport evaluate(std::span<const RankList> lists, std::span<const GroundTruth> truths,
                    std::size_t max_rank = 0);

/// CMC(k), 1-based. Throws kOutOfRange outside [1, cmc.size()].
double rank_k_accuracy(const EvalReport& report, std::size_t k);

}  // namespace reidrank
