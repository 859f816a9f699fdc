#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reidrank/embedding_store.hpp"

namespace reidrank {

struct LabelEntry {
  std::uint32_t record_id = 0;
  std::uint32_t raw_label = 0;

  bool operator==(const LabelEntry&) const = default;
};

/// Label inventory of one training dataset.
struct DatasetManifest {
  std::string dataset_tag;
  std::size_t identity_count = 0;  // M_i
  std::size_t image_count = 0;     // N_i
  std::vector<LabelEntry> labels;

  /// Manifest describing every record of an embedding set.
  static DatasetManifest from_set(const EmbeddingSet& set);
};

/// Throws kInvalidManifest unless the counts agree with the label list.
void validate_manifest(const DatasetManifest& manifest);

struct RelabeledRecord {
  std::string dataset_tag;
  std::uint32_t record_id = 0;
  std::uint32_t raw_label = 0;
  std::uint32_t combined_label = 0;
};

inline constexpr const char* kCombinedTag = "combined";

/// Union of several label spaces. Combined labels are exactly 1..M.
struct CombinedManifest {
  std::string dataset_tag = kCombinedTag;
  std::size_t identity_count = 0;  // M = sum M_i
  std::size_t image_count = 0;     // N = sum N_i
  std::map<std::pair<std::string, std::uint32_t>, std::uint32_t> mapping;
  std::vector<RelabeledRecord> records;

  /// Throws kUnknownLabel when (tag, raw_label) is not in the mapping.
  std::uint32_t combined_label(const std::string& tag, std::uint32_t raw_label) const;
};

/// Assigns combined labels in manifest order, then ascending raw label.
/// Throws kDuplicateTag on repeated tags (including the combined tag itself).
CombinedManifest merge_manifests(std::span<const DatasetManifest> manifests);

/// Copy of set with person labels replaced by combined labels and the tag
/// replaced by the combined tag. Throws kUnknownLabel on unmapped entries.
EmbeddingSet apply_mapping(const EmbeddingSet& set, const CombinedManifest& combined);

}  // namespace reidrank
