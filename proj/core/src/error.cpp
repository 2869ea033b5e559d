#include "morphfit/error.hpp"

namespace morphfit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kSizing: return "sizing error";
    case ErrorCode::kDegenerate: return "degenerate configuration";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kMalformed: return "malformed input";
    case ErrorCode::kMissingInput: return "missing input";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kNumerical: return "numerical failure";
    case ErrorCode::kNotFound: return "not found";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace morphfit
