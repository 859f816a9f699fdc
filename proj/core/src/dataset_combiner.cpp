#include "reidrank/dataset_combiner.hpp"

#include <set>
#include <unordered_set>

#include "reidrank/error.hpp"

namespace reidrank {

DatasetManifest DatasetManifest::from_set(const EmbeddingSet& set) {
  DatasetManifest m;
  m.dataset_tag = set.dataset_tag;
  m.identity_count = set.identity_count();
  m.image_count = set.size();
  m.labels.reserve(set.size());
  for (const auto& r : set.records) m.labels.push_back({r.record_id, r.person_label});
  return m;
}

void validate_manifest(const DatasetManifest& manifest) {
  const std::string where = "manifest '" + manifest.dataset_tag + "': ";
  if (manifest.dataset_tag.empty()) fail(ErrorCode::kInvalidManifest, "manifest has an empty tag");
  if (manifest.identity_count == 0 || manifest.image_count == 0) {
    fail(ErrorCode::kInvalidManifest, where + "identity and image counts must be positive");
  }
  if (manifest.labels.size() != manifest.image_count) {
    fail(ErrorCode::kInvalidManifest, where + "declares " + std::to_string(manifest.image_count) +
                                          " images but lists " +
                                          std::to_string(manifest.labels.size()));
  }
  std::set<std::uint32_t> distinct;
  std::unordered_set<std::uint32_t> ids;
  for (const auto& e : manifest.labels) {
    distinct.insert(e.raw_label);
    if (!ids.insert(e.record_id).second) {
      fail(ErrorCode::kInvalidManifest, where + "record_id " + std::to_string(e.record_id) +
                                            " appears twice");
    }
  }
  if (distinct.size() != manifest.identity_count) {
    fail(ErrorCode::kInvalidManifest,
         where + "declares " + std::to_string(manifest.identity_count) + " identities but lists " +
             std::to_string(distinct.size()));
  }
}

std::uint32_t CombinedManifest::combined_label(const std::string& tag,
                                               std::uint32_t raw_label) const {
  const auto it = mapping.find({tag, raw_label});
  if (it == mapping.end()) {
    fail(ErrorCode::kUnknownLabel,
         "no combined label for (" + tag + ", " + std::to_string(raw_label) + ")");
  }
  return it->second;
}

CombinedManifest merge_manifests(std::span<const DatasetManifest> manifests) {
  std::set<std::string> tags{kCombinedTag};
  for (const auto& m : manifests) {
    if (!tags.insert(m.dataset_tag).second) {
      fail(ErrorCode::kDuplicateTag, "dataset tag '" + m.dataset_tag + "' is used more than once");
    }
    validate_manifest(m);
  }

  CombinedManifest combined;
  std::uint32_t next = 1;
  for (const auto& m : manifests) {
    std::set<std::uint32_t> raw;
    for (const auto& e : m.labels) raw.insert(e.raw_label);
    for (std::uint32_t label : raw) combined.mapping.emplace(std::pair{m.dataset_tag, label}, next++);
    combined.identity_count += m.identity_count;
    combined.image_count += m.image_count;
  }
  combined.records.reserve(combined.image_count);
  for (const auto& m : manifests) {
    for (const auto& e : m.labels) {
      combined.records.push_back({m.dataset_tag, e.record_id, e.raw_label,
                                  combined.mapping.at({m.dataset_tag, e.raw_label})});
    }
  }
  return combined;
}

EmbeddingSet apply_mapping(const EmbeddingSet& set, const CombinedManifest& combined) {
  EmbeddingSet out = set;
  out.dataset_tag = combined.dataset_tag;
  for (auto& r : out.records) r.person_label = combined.combined_label(set.dataset_tag, r.person_label);
  if (set.empty() && combined.mapping.lower_bound({set.dataset_tag, 0}) ==
                         combined.mapping.upper_bound({set.dataset_tag, UINT32_MAX})) {
    fail(ErrorCode::kUnknownLabel, "dataset tag '" + set.dataset_tag + "' is not in the mapping");
  }
  return out;
}

}  // namespace reidrank
