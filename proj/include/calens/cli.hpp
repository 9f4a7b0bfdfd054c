#pragma once

#include <iosfwd>

namespace calens::cli {

// Exit codes are a stable contract.
enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kParseError = 2,
  kEmptyInput = 3,
  kMisaligned = 4,
  kUnknownStrategy = 5,
};

// Entry point of the `calens` tool. Results go to `out` unless a command writes
// them to a file; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calens::cli
