#pragma once

#include <stdexcept>
#include <string>

namespace hst {

// Every failure the library reports, coarse enough to map onto process
// exit codes and fine enough for tests to assert on.
enum class ErrorCode {
  parse,               // malformed input text
  dimension_mismatch,  // embedding/matrix dimensions disagree
  duplicate,           // duplicate key where uniqueness is required
  shape,               // matrix shape disagrees with header or peer
  not_finite,          // NaN/Inf where finite values are required
  infeasible,          // request cannot be satisfied (k > n, label too long)
  empty_input,         // nonempty input required
  config,              // invalid configuration value
  validation,          // structural invariant violated
  domain,              // value outside the mathematical domain of an op
  consistency,         // two inputs that must agree do not
  no_signal,           // every contrastive term was skipped
  oracle_too_large,    // brute-force oracle guard exceeded
  diverged,            // training produced non-finite loss
  io,                  // file could not be read or written
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Input-validation failures exit with status 2, runtime failures with 1.
  bool is_validation() const noexcept {
    switch (code_) {
      case ErrorCode::no_signal:
      case ErrorCode::oracle_too_large:
      case ErrorCode::diverged:
      case ErrorCode::io:
        return false;
      default:
        return true;
    }
  }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace hst
