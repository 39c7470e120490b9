#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsalign::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeFailure = 2;

/// Environment variable naming the default root for run directories.
inline constexpr const char* kOutputRootEnv = "TSALIGN_OUTPUT_ROOT";

/// Routes `args` (without the program name) to a subcommand.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsalign::cli
