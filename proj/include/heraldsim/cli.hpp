#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace heraldsim {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNoConvergence = 3 };

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heraldsim
