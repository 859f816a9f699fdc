#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reidrank {

/// One person image: feature vector plus identity and camera.
struct EmbeddingRecord {
  std::uint32_t record_id = 0;
  std::uint32_t person_label = 0;
  std::uint16_t camera_id = 0;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// A labeled collection of embeddings sharing one dimension.
struct EmbeddingSet {
  std::string dataset_tag;
  std::uint32_t dimension = 0;
  std::vector<EmbeddingRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  /// Number of distinct person labels.
  std::size_t identity_count() const;

  bool operator==(const EmbeddingSet&) const = default;
};

enum class ViolationRule {
  kZeroDimension,
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateRecordId,
  kTagTooLong,
};

struct Violation {
  std::optional<std::uint32_t> record_id;  // empty for set-level rules
  ViolationRule rule;
  std::string message;
};

/// Checks every set invariant. Empty result iff the set is valid.
std::vector<Violation> validate_set(const EmbeddingSet& set);

// Binary layout (little-endian):
//   "REID" | u16 version | u32 dimension | u64 count | u16 tag_len | tag bytes
//   count x ( u32 record_id | u32 person_label | u16 camera_id | dim x f32 )
inline constexpr char kEmbeddingMagic[4] = {'R', 'E', 'I', 'D'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;

std::size_t header_size(const EmbeddingSet& set) noexcept;
std::size_t record_size(std::uint32_t dimension) noexcept;

/// Serializes a valid set; invalid sets are rejected before any byte is
/// written. Returns the number of bytes emitted.
std::size_t write_set(const EmbeddingSet& set, std::ostream& out);

/// Parses a stream produced by write_set. Throws reidrank::Error on any
/// format or invariant failure; never returns a partially valid set.
EmbeddingSet read_set(std::istream& in);

std::size_t write_set_file(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_set_file(const std::filesystem::path& path);

/// Human-readable sidecar describing an embedding file.
std::string manifest_sidecar_json(const EmbeddingSet& set);

}  // namespace reidrank
