#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reidrank/dataset_combiner.hpp"
#include "reidrank/embedding_store.hpp"
#include "reidrank/kreciprocal.hpp"
#include "reidrank/retrieval_eval.hpp"

namespace reidrank {

// File formats shared by the command-line tool. JSON producers accept an
// optional JSON object of run parameters that is embedded verbatim under
// "parameters".

inline constexpr std::string_view kRankCsvHeader =
    "probe_id,rank,gallery_record_id,person_label,final_distance";

/// One row per (probe, gallery) pair, rank 1-based, distances with 17
/// significant digits.
void write_rank_csv(std::ostream& out, std::span<const RankList> lists,
                    const EmbeddingSet& probes, const EmbeddingSet& gallery);

std::string rank_lists_json(std::span<const RankList> lists, const EmbeddingSet& probes,
                            const EmbeddingSet& gallery, std::string_view parameters_json = {});

/// Inverse of write_rank_csv, resolving record ids against the sets.
/// Throws kInvalidSet on malformed rows or unknown ids.
std::vector<RankList> read_rank_csv(std::istream& in, const EmbeddingSet& probes,
                                    const EmbeddingSet& gallery);

std::string eval_report_json(const EvalReport& report, const EmbeddingSet& probes,
                             std::string_view parameters_json = {});

/// probe_id,average_precision
void write_ap_csv(std::ostream& out, const EvalReport& report, const EmbeddingSet& probes);

/// Two columns "rank cmc" for gnuplot.
void write_cmc_dat(std::ostream& out, const EvalReport& report);

/// {"dataset_tag", "identity_count", "image_count", "labels": [[record_id, raw_label], ...]}
DatasetManifest parse_manifest_json(std::string_view text);
std::string manifest_json(const DatasetManifest& manifest);

std::string combined_manifest_json(const CombinedManifest& combined,
                                   std::span<const DatasetManifest> sources,
                                   std::string_view parameters_json = {});

/// dataset_tag,raw_label,combined_label in combined-label order.
void write_mapping_csv(std::ostream& out, const CombinedManifest& combined);

}  // namespace reidrank
