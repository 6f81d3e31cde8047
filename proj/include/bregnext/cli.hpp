#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bnx {

/// Exit codes of every command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Environment variable overriding --deterministic ("0" or "1").
inline constexpr const char* kDeterministicEnv = "BREGNEXT_DETERMINISTIC";

/// Entry point of the bregnext tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bnx
