#ifndef SKNAP_CLI_HPP
#define SKNAP_CLI_HPP

#include <string>
#include <vector>

namespace sknap::cli {

/// Process exit codes.  Every failure path also prints a one-line JSON error
/// record ({"error": ..., "code": ...}) to stderr.
enum ExitCode : int {
    Ok = 0,
    UsageError = 2,  ///< unknown command / flag / missing argument
    ConfigError = 3, ///< config unreadable, unparsable or invalid
    SolverError = 4, ///< a solver failed to converge or reported impossibility
    IoError = 5,     ///< output path unwritable
};

/// Entry point behind main(): parses `args` (without argv[0]) and dispatches
/// to one of
///   solve-dp | optimize-switchover | optimize-pricing | simulate |
///   compare | bounds | reproduce {table1..table5, figure1}
/// Configs are fully validated before any output file is opened, so a failed
/// run never leaves partial artifacts.  Output directory defaults to the
/// SKNAP_OUT_DIR environment variable when --out is omitted.
int run(const std::vector<std::string>& args);

} // namespace sknap::cli

#endif
