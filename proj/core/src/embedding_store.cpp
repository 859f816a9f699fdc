#include "reidrank/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "reidrank/error.hpp"

namespace reidrank {
namespace {

// Little-endian byte buffer helpers.
class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }

  const std::string& buffer() const { return buffer_; }
  void clear() { buffer_.clear(); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void exact(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(ErrorCode::kTruncated, std::string("truncated payload while reading ") + what);
    }
  }

  std::uint64_t unsigned_le(int width, const char* what) {
    std::array<unsigned char, 8> raw{};
    exact(raw.data(), static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | raw[static_cast<std::size_t>(i)];
    return v;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

std::size_t EmbeddingSet::identity_count() const {
  std::set<std::uint32_t> labels;
  for (const auto& r : records) labels.insert(r.person_label);
  return labels.size();
}

std::vector<Violation> validate_set(const EmbeddingSet& set) {
  std::vector<Violation> out;
  if (set.dimension == 0) {
    out.push_back({std::nullopt, ViolationRule::kZeroDimension, "dimension must be >= 1"});
  }
  if (set.dataset_tag.size() > std::numeric_limits<std::uint16_t>::max()) {
    out.push_back({std::nullopt, ViolationRule::kTagTooLong, "dataset tag exceeds 65535 bytes"});
  }
  std::unordered_set<std::uint32_t> seen;
  for (const auto& r : set.records) {
    if (!seen.insert(r.record_id).second) {
      out.push_back({r.record_id, ViolationRule::kDuplicateRecordId,
                     "record_id " + std::to_string(r.record_id) + " is not unique"});
    }
    if (r.vector.size() != set.dimension) {
      out.push_back({r.record_id, ViolationRule::kDimensionMismatch,
                     "record " + std::to_string(r.record_id) + " has " +
                         std::to_string(r.vector.size()) + " components, expected " +
                         std::to_string(set.dimension)});
    }
    for (float v : r.vector) {
      if (!std::isfinite(v)) {
        out.push_back({r.record_id, ViolationRule::kNonFiniteValue,
                       "record " + std::to_string(r.record_id) + " has a non-finite component"});
        break;
      }
    }
  }
  return out;
}

std::size_t header_size(const EmbeddingSet& set) noexcept {
  return 4 + 2 + 4 + 8 + 2 + set.dataset_tag.size();
}

std::size_t record_size(std::uint32_t dimension) noexcept {
  return 4 + 4 + 2 + 4 * static_cast<std::size_t>(dimension);
}

std::size_t write_set(const EmbeddingSet& set, std::ostream& out) {
  if (auto violations = validate_set(set); !violations.empty()) {
    fail(ErrorCode::kInvalidSet, "refusing to write invalid set: " + violations.front().message);
  }

  ByteWriter w;
  w.bytes(kEmbeddingMagic, 4);
  w.u16(kEmbeddingVersion);
  w.u32(set.dimension);
  w.u64(set.records.size());
  w.u16(static_cast<std::uint16_t>(set.dataset_tag.size()));
  w.bytes(set.dataset_tag.data(), set.dataset_tag.size());
  std::size_t written = w.buffer().size();
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));

  for (const auto& r : set.records) {
    w.clear();
    w.u32(r.record_id);
    w.u32(r.person_label);
    w.u16(r.camera_id);
    for (float v : r.vector) w.f32(v);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    written += w.buffer().size();
  }
  if (!out) fail(ErrorCode::kIo, "write to embedding sink failed");
  return written;
}

EmbeddingSet read_set(std::istream& in) {
  ByteReader r(in);

  char magic[4];
  r.exact(magic, 4, "magic");
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "bad magic bytes (expected \"REID\")");
  }
  const auto version = static_cast<std::uint16_t>(r.unsigned_le(2, "version"));
  if (version != kEmbeddingVersion) {
    fail(ErrorCode::kUnsupportedVersion, "unsupported format version " + std::to_string(version));
  }

  EmbeddingSet set;
  set.dimension = static_cast<std::uint32_t>(r.unsigned_le(4, "dimension"));
  if (set.dimension == 0) fail(ErrorCode::kZeroDimension, "declared dimension is 0");
  const std::uint64_t count = r.unsigned_le(8, "record count");
  const auto tag_len = static_cast<std::size_t>(r.unsigned_le(2, "tag length"));
  set.dataset_tag.resize(tag_len);
  r.exact(set.dataset_tag.data(), tag_len, "dataset tag");

  // The declared count is untrusted; grow as records actually arrive.
  set.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 16)));
  std::unordered_set<std::uint32_t> seen;
  std::vector<unsigned char> payload(4 * static_cast<std::size_t>(set.dimension));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.record_id = static_cast<std::uint32_t>(r.unsigned_le(4, "record_id"));
    rec.person_label = static_cast<std::uint32_t>(r.unsigned_le(4, "person_label"));
    rec.camera_id = static_cast<std::uint16_t>(r.unsigned_le(2, "camera_id"));
    r.exact(payload.data(), payload.size(), "vector");
    rec.vector.resize(set.dimension);
    for (std::size_t c = 0; c < set.dimension; ++c) {
      const unsigned char* b = payload.data() + 4 * c;
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) {
        fail(ErrorCode::kNonFinite,
             "record " + std::to_string(rec.record_id) + " has a non-finite component");
      }
      rec.vector[c] = v;
    }
    if (!seen.insert(rec.record_id).second) {
      fail(ErrorCode::kInvalidSet, "duplicate record_id " + std::to_string(rec.record_id));
    }
    set.records.push_back(std::move(rec));
  }
  if (!r.at_end()) fail(ErrorCode::kTrailingData, "unexpected bytes after the last record");
  return set;
}

std::size_t write_set_file(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (auto violations = validate_set(set); !violations.empty()) {
    fail(ErrorCode::kInvalidSet, "refusing to write invalid set: " + violations.front().message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  const std::size_t n = write_set(set, out);
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write to " + path.string() + " failed");
  return n;
}

EmbeddingSet read_set_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return read_set(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string manifest_sidecar_json(const EmbeddingSet& set) {
  std::set<std::uint16_t> cameras;
  for (const auto& r : set.records) cameras.insert(r.camera_id);
  nlohmann::ordered_json j;
  j["format"] = "REID";
  j["version"] = kEmbeddingVersion;
  j["dataset_tag"] = set.dataset_tag;
  j["dimension"] = set.dimension;
  j["record_count"] = set.records.size();
  j["identity_count"] = set.identity_count();
  j["camera_count"] = cameras.size();
  return j.dump(2) + "\n";
}

}  // namespace reidrank
