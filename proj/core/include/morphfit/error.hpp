#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace morphfit {

/// Failure categories. Every exception thrown by the library is a morphfit::Error
/// carrying one of these, so callers (the CLI in particular) can map them to
/// stable exit codes.
enum class ErrorCode {
  kInvalidArgument,   // bad parameter value (negative weight, zero width, ...)
  kSizing,            // dimension mismatch between inputs
  kDegenerate,        // rank-deficient or geometrically degenerate configuration
  kBadMagic,          // file does not start with the expected magic
  kVersionMismatch,   // recognised format, unsupported version
  kTruncatedPayload,  // file ended before the declared payload
  kMalformed,         // syntactically or semantically invalid input data
  kMissingInput,      // referenced file does not exist
  kIo,                // read/write failure
  kNumerical,         // non-finite values, divergence
  kNotFound,          // unknown identifier (session, model id)
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace morphfit
