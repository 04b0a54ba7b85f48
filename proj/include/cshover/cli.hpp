/**
 * @file cli.hpp
 * @brief Batch command-line frontend.
 *
 * Subcommands: stack, targets, postproc, eval, augment, loss-check.
 * Exit codes: 0 success, 1 runtime failure, 2 usage error.
 */
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cshover::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the CLI with explicit arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace cshover::cli
