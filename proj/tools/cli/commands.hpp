#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace bvecchia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

// Subcommand names in the order they are listed by --help.
const std::vector<std::string>& command_names();

// Executes one subcommand and returns its result records. Per-cell failures
// of sweeping commands become records with a non-null "error"; anything else
// propagates as an exception.
std::vector<nlohmann::json> run_command(const std::string& command, const ExperimentConfig& config);

// Full command-line entry point: parses args (without the program name),
// writes JSON-lines records and returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Maps a library failure to its exit code and writes a one-line message to err.
// Exceptions of any other type are rethrown.
int exit_code_for(std::exception_ptr failure, std::ostream& err);

}  // namespace bvecchia::cli
