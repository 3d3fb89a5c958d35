#pragma once

#include <ostream>

namespace ctsev {

/// Process exit statuses of the command-line tool.
enum ExitStatus : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitPartial = 3,
};

/// Entry point of the `ctsev` tool: generate | train | predict | evaluate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctsev
