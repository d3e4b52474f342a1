#include "repairenv/tools.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <sstream>

#include "repairenv/build_gate.hpp"
#include "repairenv/dependency_spec.hpp"
#include "repairenv/error.hpp"

namespace repairenv {

namespace fs = std::filesystem;

std::string_view to_string(BuildStatus s) noexcept {
    switch (s) {
    case BuildStatus::Success: return "success";
    case BuildStatus::Failure: return "failure";
    case BuildStatus::Timeout: return "timeout";
    }
    return "failure";
}

BuildStatus build_status_from_string(std::string_view s) {
    if (s == "success") return BuildStatus::Success;
    if (s == "failure") return BuildStatus::Failure;
    if (s == "timeout") return BuildStatus::Timeout;
    throw Error(Errc::InvalidArgument, "unknown build status " + std::string(s));
}

BuildReport run_build(const Workspace& ws, const ToolLimits& limits, BuildGate* gate,
                      const LogAnalyzerConfig& log_config) {
    CommandOptions opts;
    opts.cwd = ws.root();
    opts.timeout = limits.build_timeout;

    CommandResult result;
    {
        std::optional<BuildGate::Permit> permit;
        if (gate != nullptr) permit.emplace(gate->acquire());
        result = run_command(ws.fixture().manifest.build_command, opts);
    }

    BuildReport report;
    report.duration_s = result.duration.count();
    report.exit_code = result.exit_code;
    report.log = std::move(result.output);
    if (result.timed_out) {
        report.status = BuildStatus::Timeout;
        report.top_errors.push_back(make_signature("build timed out"));
        return report;
    }
    report.status = result.exit_code == 0 ? BuildStatus::Success : BuildStatus::Failure;
    if (report.status == BuildStatus::Success) return report;

    report.top_errors = analyze_log(report.log, log_config);
    if (report.top_errors.empty()) {
        // Nothing matched the error patterns; fall back to the last line the build printed.
        std::string last;
        std::istringstream in(report.log);
        for (std::string line; std::getline(in, line);)
            if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
        report.top_errors.push_back(
            make_signature(last.empty() ? "build failed with exit code " + std::to_string(report.exit_code) : last));
    }
    return report;
}

std::string render_build_report(const BuildReport& report) {
    std::string out;
    switch (report.status) {
    case BuildStatus::Success:
        return "BUILD SUCCESSFUL\n";
    case BuildStatus::Timeout:
        out = "BUILD TIMED OUT\n";
        break;
    case BuildStatus::Failure:
        out = "BUILD FAILED (exit code " + std::to_string(report.exit_code) + ")\n";
        break;
    }
    if (!report.top_errors.empty()) {
        out += "Top errors:\n";
        std::size_t n = 0;
        for (const auto& e : report.top_errors) {
            if (++n > 5) break;
            out += std::to_string(n) + ". " + e.raw + "\n";
        }
    }
    if (!report.log.empty()) {
        std::vector<std::string> lines;
        std::istringstream in(report.log);
        for (std::string line; std::getline(in, line);) lines.push_back(line);
        constexpr std::size_t kTail = 40;
        const std::size_t from = lines.size() > kTail ? lines.size() - kTail : 0;
        out += "Build log";
        if (from > 0) out += " (last " + std::to_string(kTail) + " lines)";
        out += ":\n";
        for (std::size_t i = from; i < lines.size(); ++i) out += lines[i] + "\n";
    }
    return out;
}

namespace {

struct ToolFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path resolve_inside(const Workspace& ws, const std::string& rel) {
    if (rel.empty()) throw ToolFailure("empty file path");
    const auto root = fs::weakly_canonical(ws.root());
    fs::path p(rel);
    if (p.is_absolute()) {
        // Accept absolute paths only when they already point into the workspace.
        p = fs::weakly_canonical(p);
    } else {
        p = fs::weakly_canonical(root / p);
    }
    auto [root_end, _] = std::mismatch(root.begin(), root.end(), p.begin(), p.end());
    if (root_end != root.end()) throw ToolFailure("path escapes the workspace: " + rel);
    return p;
}

std::vector<std::string> workspace_files(const Workspace& ws) {
    std::vector<std::string> files;
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(ws.root(), ec); it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        if (ec) break;
        if (it->is_regular_file()) files.push_back(fs::relative(it->path(), ws.root()).generic_string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

bool glob_matches(const std::string& pattern, const std::string& rel) {
    if (::fnmatch(pattern.c_str(), rel.c_str(), 0) == 0) return true;
    const auto base = fs::path(rel).filename().string();
    return ::fnmatch(pattern.c_str(), base.c_str(), 0) == 0;
}

std::string require(const ToolCall& call, std::string_view key) {
    auto v = call.argument(key);
    if (!v) throw ToolFailure("missing parameter " + std::string(key));
    return *v;
}

DependencySpec load_spec(const Workspace& ws) {
    const auto path = ws.root() / kDependencySpecFile;
    if (!fs::exists(path)) throw ToolFailure("product-spec.json not found");
    try {
        return DependencySpec::parse(read_file_bytes(path));
    } catch (const Error& e) {
        throw ToolFailure(e.what());
    }
}

std::string find_files(const ToolCall& call, const Workspace& ws) {
    const auto pattern = require(call, "file_path");
    std::string out;
    for (const auto& f : workspace_files(ws))
        if (glob_matches(pattern, f)) out += f + "\n";
    return out.empty() ? "No files found matching " + pattern + "\n" : out;
}

std::string find_files_with_text(const ToolCall& call, const Workspace& ws) {
    const auto needle = require(call, "search_text");
    const auto glob = call.argument("glob_file_pattern");
    if (needle.empty()) throw ToolFailure("search_text is empty");
    std::string out;
    for (const auto& f : workspace_files(ws)) {
        if (glob && !glob->empty() && !glob_matches(*glob, f)) continue;
        if (read_file_bytes(ws.root() / f).find(needle) != std::string::npos) out += f + "\n";
    }
    return out.empty() ? "No files contain the text\n" : out;
}

std::string read_file(const ToolCall& call, const Workspace& ws) {
    const auto path = resolve_inside(ws, require(call, "file_path"));
    if (!fs::is_regular_file(path)) throw ToolFailure("file not found: " + require(call, "file_path"));
    return read_file_bytes(path);
}

std::string write_file(const ToolCall& call, const Workspace& ws) {
    const auto rel = require(call, "file_path");
    const auto path = resolve_inside(ws, rel);
    if (!fs::is_regular_file(path)) throw ToolFailure("file not found: " + rel + " (write_file only updates existing files)");
    const auto contents = require(call, "updated_contents");
    write_file_bytes(path, contents);
    return "Wrote " + std::to_string(contents.size()) + " bytes to " + rel + "\n";
}

ToolOutcome run_sh(const ToolCall& call, const Workspace& ws, const ToolLimits& limits) {
    CommandOptions opts;
    opts.cwd = ws.root();
    opts.timeout = limits.tool_timeout;
    auto r = run_command(require(call, "cmd"), opts);
    if (r.timed_out) return {{std::string(tool::kRunSh), ToolStatus::ToolTimeout, ""}, std::nullopt};
    std::string content = r.output;
    if (!content.empty() && content.back() != '\n') content.push_back('\n');
    content += "[exit code " + std::to_string(r.exit_code) + "]\n";
    return {{std::string(tool::kRunSh), r.exit_code == 0 ? ToolStatus::Ok : ToolStatus::Error, content},
            std::nullopt};
}

std::string remove_dependency(const ToolCall& call, const Workspace& ws) {
    const auto name = require(call, "dependency_name");
    auto spec = load_spec(ws);
    if (!spec.remove(name)) throw ToolFailure("dependency not found in product-spec.json: " + name);
    write_file_bytes(ws.root() / kDependencySpecFile, spec.serialize());
    return "Removed " + name + " from product-spec.json\n";
}

std::string dependency_upgrade(const ToolCall& call, const Workspace& ws) {
    const auto name = require(call, "dependency_to_upgrade");
    auto spec = load_spec(ws);
    auto previous = spec.version_of(name);
    if (!previous) throw ToolFailure("dependency not found in product-spec.json: " + name);
    auto version = call.argument("version_to_upgrade_to");
    if (!version || version->empty()) {
        version = ws.fixture().registry.latest(name);
        if (!version) throw ToolFailure("no registry versions known for " + name);
    }
    spec.set_version(name, *version);
    write_file_bytes(ws.root() / kDependencySpecFile, spec.serialize());
    return "Upgraded " + name + " from " + *previous + " to " + *version + "\n";
}

std::string upgrade_gradle(const Workspace& ws) {
    const auto& target = ws.fixture().manifest.current_gradle_version;
    if (target.empty()) throw ToolFailure("no current Gradle version is configured for this repository");
    const auto marker = ws.root() / kGradleVersionFile;
    std::string previous = fs::exists(marker) ? read_file_bytes(marker) : std::string("unknown");
    while (!previous.empty() && (previous.back() == '\n' || previous.back() == '\r')) previous.pop_back();
    write_file_bytes(marker, target + "\n");
    return "Upgraded Gradle from " + previous + " to " + target + "\n";
}

std::string ask_for_help(const ToolCall& call, const ToolContext& ctx) {
    const auto question = require(call, "troubleshooting_question");
    if (ctx.knowledge_base == nullptr || ctx.knowledge_base->empty())
        throw ToolFailure("the knowledge base has no entries");
    const auto top = kb_lookup(*ctx.knowledge_base, question, 1).front();
    return "Suggested fix (" + top.entry->id + "): " + top.entry->fix_text + "\n";
}

}  // namespace

ToolOutcome execute_tool(const ToolCall& call, ToolContext& ctx, const ToolLimits& limits) {
    const auto& ws = ctx.workspace;
    auto ok = [&](std::string content) { return ToolOutcome{{call.name, ToolStatus::Ok, std::move(content)}, std::nullopt}; };
    try {
        validate_call(call);
        if (call.name == tool::kFindFiles) return ok(find_files(call, ws));
        if (call.name == tool::kFindFilesWithText) return ok(find_files_with_text(call, ws));
        if (call.name == tool::kReadFile) return ok(read_file(call, ws));
        if (call.name == tool::kWriteFile) return ok(write_file(call, ws));
        if (call.name == tool::kRunSh) return run_sh(call, ws, limits);
        if (call.name == tool::kRemoveDependency) return ok(remove_dependency(call, ws));
        if (call.name == tool::kDependencyUpgrade) return ok(dependency_upgrade(call, ws));
        if (call.name == tool::kUpgradeGradle) return ok(upgrade_gradle(ws));
        if (call.name == tool::kAskForHelp) return ok(ask_for_help(call, ctx));
        if (call.name == tool::kValidateAndBuild) {
            ToolLimits build_limits = limits;
            build_limits.build_timeout = std::min(limits.build_timeout, limits.tool_timeout);
            auto report = run_build(ws, build_limits, ctx.build_gate, ctx.log_config);
            ToolOutcome out;
            out.result.tool_name = call.name;
            if (report.status == BuildStatus::Timeout) {
                out.result.status = ToolStatus::ToolTimeout;
            } else {
                out.result.status = report.status == BuildStatus::Success ? ToolStatus::Ok : ToolStatus::Error;
                out.result.content = render_build_report(report);
            }
            out.build = std::move(report);
            return out;
        }
        return {{call.name, ToolStatus::Error, "unsupported tool " + call.name}, std::nullopt};
    } catch (const Error& e) {
        return {{call.name, ToolStatus::Error, e.what()}, std::nullopt};
    } catch (const std::exception& e) {
        return {{call.name, ToolStatus::Error, e.what()}, std::nullopt};
    }
}

}  // namespace repairenv
