#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ivdac::cli {

/// Runs one subcommand. Returns 0 on success, 1 for usage or input errors
/// and 2 for physics failures (infeasible rate, no well, ...).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Names of all subcommands in registration order.
std::vector<std::string> subcommands();

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "IVDAC_OUT_DIR";

}  // namespace ivdac::cli
