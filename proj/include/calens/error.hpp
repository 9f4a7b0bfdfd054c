#pragma once

#include <stdexcept>
#include <string>

namespace calens {

// Failure categories. The CLI maps each one to a fixed exit code.
enum class ErrorKind {
  validation,   // malformed values (non-finite scores, labels out of range, bad parameters)
  empty_input,  // an operation that needs at least one row got none
  shape,        // mismatched row or class counts
  misaligned,   // paired inputs whose labels disagree
  usage,        // valid inputs used with the wrong operation
  infeasible,   // constraint system without a valid solution
  size_limit,   // enumeration too large
  parse,        // file or grammar errors
  unknown_strategy,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace calens
