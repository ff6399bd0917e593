#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "momentflow/error.hpp"

namespace mf {

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitValidation = 2,
  kExitNumeric = 3,
  kExitIntegrity = 4,
};

int exit_code_for(ErrorCode code) noexcept;

/// Runs the command surface (init, append, query, metric, verify, bench).
/// args[0] is the program name. Never throws; failures map to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mf
