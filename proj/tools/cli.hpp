#pragma once

#include <string>
#include <vector>

namespace gntk::cli {

constexpr int kSchemaVersion = 1;

enum ExitCode { ok = 0, violation = 1, usage = 2 };

/// Parses argv, runs one subcommand, writes its artifacts. Returns the exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace gntk::cli
