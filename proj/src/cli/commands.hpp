#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qkm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationFailure = 1,
  kUsageError = 2,
  kIoError = 3,
};

/// Entry point shared by the `qkm` binary and the tests. `args` excludes the
/// program name. Reports go to --out when given, otherwise to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qkm::cli
