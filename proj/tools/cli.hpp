#pragma once

#include <string>
#include <vector>

namespace mh3d::cli {

enum ExitCode : int { kOk = 0, kNumerical = 1, kUsage = 2 };

/// Parses and runs one command. Never throws; errors are printed to stderr
/// and mapped to an exit code.
int run(const std::vector<std::string>& args);

}  // namespace mh3d::cli
