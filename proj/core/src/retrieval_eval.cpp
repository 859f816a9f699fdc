#include "reidrank/retrieval_eval.hpp"

#include <algorithm>
#include <numeric>

#include "reidrank/error.hpp"

namespace reidrank {
namespace {

bool contains(const IndexSet& set, std::uint32_t value) {
  return std::binary_search(set.begin(), set.end(), value);
}

void require_permutation(std::span<const std::uint32_t> ranked) {
  std::vector<bool> seen(ranked.size(), false);
  for (std::uint32_t g : ranked) {
    if (g >= ranked.size() || seen[g]) {
      fail(ErrorCode::kInvalidSet, "rank list is not a permutation of gallery indices");
    }
    seen[g] = true;
  }
}

}  // namespace

std::vector<GroundTruth> build_ground_truth(const EmbeddingSet& probes,
                                            const EmbeddingSet& gallery, bool junk_filter) {
  std::vector<GroundTruth> truths(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& probe = probes.records[p];
    auto& truth = truths[p];
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      const auto& item = gallery.records[g];
      if (item.person_label != probe.person_label) continue;
      if (junk_filter && item.camera_id == probe.camera_id) {
        truth.junk.push_back(static_cast<std::uint32_t>(g));
      } else {
        truth.relevant.push_back(static_cast<std::uint32_t>(g));
      }
    }
    if (truth.relevant.empty()) {
      fail(ErrorCode::kNoRelevant, "probe record " + std::to_string(probe.record_id) +
                                       " (label " + std::to_string(probe.person_label) +
                                       ") has no relevant gallery item");
    }
  }
  return truths;
}

std::optional<std::size_t> first_hit_rank(std::span<const std::uint32_t> ranked,
                                          const GroundTruth& truth) {
  std::size_t rank = 0;
  for (std::uint32_t g : ranked) {
    if (contains(truth.junk, g)) continue;
    ++rank;
    if (contains(truth.relevant, g)) return rank;
  }
  return std::nullopt;
}

double average_precision(std::span<const std::uint32_t> ranked, const GroundTruth& truth) {
  if (truth.relevant.empty()) fail(ErrorCode::kNoRelevant, "average precision needs a relevant item");
  require_permutation(ranked);
  std::size_t rank = 0;
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::uint32_t g : ranked) {
    if (contains(truth.junk, g)) continue;
    ++rank;
    if (contains(truth.relevant, g)) {
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return precision_sum / static_cast<double>(truth.relevant.size());
}

double average_precision(const RankList& ranked, const GroundTruth& truth) {
  return average_precision(ranked.order(), truth);
}

std::vector<double> cmc_curve(std::span<const RankList> lists,
                              std::span<const GroundTruth> truths, std::size_t max_rank) {
  if (lists.size() != truths.size()) {
    fail(ErrorCode::kDimensionMismatch, "rank lists and ground truths differ in count");
  }
  if (lists.empty()) fail(ErrorCode::kEmptyInput, "CMC needs at least one probe");
  std::vector<std::size_t> first_hits(max_rank + 1, 0);
  for (std::size_t p = 0; p < lists.size(); ++p) {
    const auto hit = first_hit_rank(lists[p].order(), truths[p]);
    if (!hit) {
      fail(ErrorCode::kNoRelevant,
           "probe " + std::to_string(lists[p].probe_index) + " has no relevant item in its list");
    }
    if (*hit <= max_rank) ++first_hits[*hit];
  }
  std::vector<double> cmc(max_rank);
  std::size_t cumulative = 0;
  for (std::size_t r = 1; r <= max_rank; ++r) {
    cumulative += first_hits[r];
    cmc[r - 1] = static_cast<double>(cumulative) / static_cast<double>(lists.size());
  }
  return cmc;
}

double mean_ap(std::span<const double> per_probe_ap) {
  if (per_probe_ap.empty()) fail(ErrorCode::kEmptyInput, "mAP needs at least one probe");
  const double sum = std::accumulate(per_probe_ap.begin(), per_probe_ap.end(), 0.0);
  return sum / static_cast<double>(per_probe_ap.size());
}

EvalReport evaluate(std::span<const RankList> lists, std::span<const GroundTruth> truths,
                    std::size_t max_rank) {
  if (max_rank == 0) {
    for (const auto& l : lists) max_rank = std::max(max_rank, l.entries.size());
  }
  EvalReport report;
  report.cmc = cmc_curve(lists, truths, max_rank);
  report.per_probe_ap.reserve(lists.size());
  for (std::size_t p = 0; p < lists.size(); ++p) {
    report.per_probe_ap.push_back(average_precision(lists[p], truths[p]));
  }
  report.map = mean_ap(report.per_probe_ap);
  report.probe_count = lists.size();
  return report;
}

double rank_k_accuracy(const EvalReport& report, std::size_t k) {
  if (k < 1 || k > report.cmc.size()) {
    fail(ErrorCode::kOutOfRange, "rank " + std::to_string(k) + " outside [1, " +
                                     std::to_string(report.cmc.size()) + "]");
  }
  return report.cmc[k - 1];
}

}  // namespace reidrank
