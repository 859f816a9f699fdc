#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reidrank::cli {

// Process exit codes. 0 is returned only on success.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;            // bad flags, unreadable paths, other failures
inline constexpr int kExitMalformedInput = 2;   // corrupt or invalid input files
inline constexpr int kExitDimensionMismatch = 3;
inline constexpr int kExitParameterRange = 4;   // k, lambda or overlap out of range
inline constexpr int kExitNoRelevant = 5;       // a probe has no relevant gallery item
inline constexpr int kExitDuplicateTag = 6;
inline constexpr int kExitBadShape = 7;         // hcn-demo dimensions not divisible by 8
inline constexpr int kExitGradientCheck = 8;    // hcn-demo gradient check above threshold

/// Runs one invocation. Reports go to files under --out and to `out`;
/// diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace reidrank::cli
