#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prefaudit::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

/// Runs one subcommand. `args` excludes the program name. Results go to
/// `out` unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prefaudit::cli
