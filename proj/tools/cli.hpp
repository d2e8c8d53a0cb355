#pragma once
// Command implementations behind the `tracs` executable. Linked into the
// tests as a library so the commands can run in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace tracs::cli {

// Parses argv, runs one subcommand and returns the process exit code:
// 0 success, 1 runtime failure, 2 invalid input or configuration.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Convenience for tests: args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tracs::cli
