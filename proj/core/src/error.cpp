#include "reidrank/error.hpp"

namespace reidrank {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kZeroDimension: return "zero-dimension";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTrailingData: return "trailing-data";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kInvalidSet: return "invalid-set";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNotSquare: return "not-square";
    case ErrorCode::kNotPsd: return "not-psd";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kNoRelevant: return "no-relevant";
    case ErrorCode::kInvalidManifest: return "invalid-manifest";
    case ErrorCode::kDuplicateTag: return "duplicate-tag";
    case ErrorCode::kUnknownLabel: return "unknown-label";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
  }
  return "unknown";
}

}  // namespace reidrank
