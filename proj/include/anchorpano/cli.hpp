#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace anchorpano {

inline constexpr const char* kToolName = "anchorpano";
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitService = 4 };

/// Parses and runs one subcommand. `args` excludes the program name. Errors
/// are reported as a single JSON line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace anchorpano
