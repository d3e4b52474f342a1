#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>

namespace repairenv {

using Seconds = std::chrono::duration<double>;

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;  // interleaved stdout and stderr
    Seconds duration{0};
};

struct CommandOptions {
    std::filesystem::path cwd;
    Seconds timeout{3600};
    std::size_t max_output_bytes = 1 << 20;
    std::map<std::string, std::string> extra_env;
};

/// Runs `command` through `/bin/bash -c` in its own process group. On timeout the whole
/// group is killed with SIGKILL and the captured output is discarded.
CommandResult run_command(const std::string& command, const CommandOptions& options);

}  // namespace repairenv
