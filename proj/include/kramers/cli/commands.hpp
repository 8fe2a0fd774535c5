#ifndef KRAMERS_CLI_COMMANDS_HPP
#define KRAMERS_CLI_COMMANDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace kramers::cli {

inline constexpr int exit_success = 0;
inline constexpr int exit_numerical_failure = 1;
inline constexpr int exit_usage_error = 2;

/// Runs the tool with argv-style arguments (program name excluded).
/// Environment variables KRAMERS_CONFIG, KRAMERS_OUT and KRAMERS_SEED stand
/// in for the matching global flags when those are absent.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kramers::cli

#endif
