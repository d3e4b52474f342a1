#include "repairenv/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <thread>
#include <vector>

#include "repairenv/error.hpp"

extern char** environ;

namespace repairenv {

namespace {

using Clock = std::chrono::steady_clock;

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

std::vector<std::string> build_environment(const std::map<std::string, std::string>& extra) {
    std::vector<std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        auto eq = kv.find('=');
        if (eq != std::string_view::npos && extra.contains(std::string(kv.substr(0, eq)))) continue;
        env.emplace_back(kv);
    }
    for (const auto& [k, v] : extra) env.push_back(k + "=" + v);
    return env;
}

int exit_code_of(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

}  // namespace

CommandResult run_command(const std::string& command, const CommandOptions& options) {
    int pipefd[2];
    if (::pipe2(pipefd, O_CLOEXEC) != 0)
        throw Error(Errc::IoFailure, std::string("pipe2: ") + std::strerror(errno));
    Fd read_end(pipefd[0]);
    Fd write_end(pipefd[1]);

    // Everything the child touches is prepared before fork.
    const std::string cwd = options.cwd.empty() ? std::string(".") : options.cwd.string();
    auto env_storage = build_environment(options.extra_env);
    std::vector<char*> envp;
    envp.reserve(env_storage.size() + 1);
    for (auto& s : env_storage) envp.push_back(s.data());
    envp.push_back(nullptr);
    const char* argv[] = {"/bin/bash", "-c", command.c_str(), nullptr};

    const auto started = Clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(Errc::IoFailure, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(write_end.fd, STDOUT_FILENO);
        ::dup2(write_end.fd, STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (::chdir(cwd.c_str()) != 0) ::_exit(126);
        ::execve(argv[0], const_cast<char* const*>(argv), envp.data());
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    write_end.reset();
    ::fcntl(read_end.fd, F_SETFL, ::fcntl(read_end.fd, F_GETFL) | O_NONBLOCK);

    const auto deadline =
        started + std::chrono::duration_cast<Clock::duration>(options.timeout);

    CommandResult result;
    bool exited = false;
    bool eof = false;
    int status = 0;
    bool truncated = false;
    Clock::time_point exited_at{};
    std::array<char, 8192> buf{};

    auto drain = [&] {
        for (;;) {
            ssize_t n = ::read(read_end.fd, buf.data(), buf.size());
            if (n > 0) {
                if (result.output.size() < options.max_output_bytes) {
                    auto room = options.max_output_bytes - result.output.size();
                    result.output.append(buf.data(), std::min<std::size_t>(room, static_cast<std::size_t>(n)));
                    if (static_cast<std::size_t>(n) > room) truncated = true;
                } else {
                    truncated = true;
                }
                continue;
            }
            if (n == 0) eof = true;
            break;
        }
    };

    while (!(exited && eof)) {
        const auto now = Clock::now();
        if (!exited && now >= deadline) {
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            result.timed_out = true;
            break;
        }
        if (!eof) {
            auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            if (exited) wait_ms = 50;
            pollfd pfd{read_end.fd, POLLIN, 0};
            ::poll(&pfd, 1, static_cast<int>(std::clamp<long long>(wait_ms, 0, 20)));
            drain();
        }
        if (!exited) {
            pid_t r = ::waitpid(pid, &status, WNOHANG);
            if (r == pid) {
                exited = true;
                exited_at = Clock::now();
                // Stragglers still holding the pipe open go down with the group.
                ::kill(-pid, SIGKILL);
            }
        } else if (!eof) {
            // A descendant that escaped the process group may keep the pipe open.
            if (Clock::now() - exited_at > std::chrono::seconds(1)) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
            drain();
        }
    }
    result.duration = Clock::now() - started;

    if (result.timed_out) {
        result.exit_code = -1;
        result.output.clear();
        return result;
    }
    result.exit_code = exit_code_of(status);
    if (truncated) result.output += "\n[output truncated]\n";
    return result;
}

}  // namespace repairenv
