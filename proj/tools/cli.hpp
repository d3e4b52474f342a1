#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace repairenv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Runs the command line `args` (args[0] is the program name). Human-readable progress goes
/// to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace repairenv::cli
