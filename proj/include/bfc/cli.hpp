#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bfc {

/// Exit codes of the command-line driver.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// Runs one subcommand; args excludes the program name.
///
///   simulate | optimize | gradient-check | verify-forms | check-smallness | oracle
///   --config PATH (required)  --out DIR  --seed N  --override key=value (repeatable)
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bfc
