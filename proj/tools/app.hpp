#pragma once

#include <string>
#include <vector>

namespace lawsde::app {

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kUsageError = 2 };

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code. Messages go to stderr.
int run(const std::vector<std::string>& args);

}  // namespace lawsde::app
