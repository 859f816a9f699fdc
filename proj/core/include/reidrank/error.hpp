#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reidrank {

/// Failure categories raised by the library. The CLI maps each one onto a
/// distinct process exit code.
enum class ErrorCode {
  kBadMagic,
  kUnsupportedVersion,
  kZeroDimension,
  kTruncated,
  kTrailingData,
  kNonFinite,
  kInvalidSet,
  kIo,
  kDimensionMismatch,
  kNotSquare,
  kNotPsd,
  kEmptyInput,
  kOutOfRange,
  kNoRelevant,
  kInvalidManifest,
  kDuplicateTag,
  kUnknownLabel,
  kShapeMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace reidrank
