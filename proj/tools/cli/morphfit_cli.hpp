#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "morphfit/error.hpp"

namespace morphfit::cli {

/// Process exit codes. They are stable across releases.
enum ExitCode : int {
  kOk = 0,
  kBadArgs = 2,
  kMissingInput = 3,
  kMalformedInput = 4,
  kNumericalFailure = 5,
  kSizingMismatch = 6,
};

int exit_code(ErrorCode code);

/// Runs the command line in-process. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace morphfit::cli
