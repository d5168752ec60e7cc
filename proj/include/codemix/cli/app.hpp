#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace codemix::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs one codemix command line. args[0] is the program name. Results go to
/// `out` unless a subcommand writes a file; progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace codemix::cli
