#pragma once

#include <optional>
#include <string>
#include <vector>

#include "repairenv/fixtures.hpp"
#include "repairenv/knowledge_base.hpp"
#include "repairenv/log_analyzer.hpp"
#include "repairenv/process.hpp"
#include "repairenv/tool_protocol.hpp"

namespace repairenv {

class BuildGate;

enum class BuildStatus { Success, Failure, Timeout };

std::string_view to_string(BuildStatus s) noexcept;
BuildStatus build_status_from_string(std::string_view s);

struct BuildReport {
    BuildStatus status = BuildStatus::Failure;
    double duration_s = 0.0;
    int exit_code = -1;
    std::string log;
    std::vector<ErrorSignature> top_errors;  // empty iff status == Success
};

struct ToolLimits {
    Seconds tool_timeout{3600};
    Seconds build_timeout{3600};
};

/// What a tool may touch: one workspace plus the shared read-only services.
struct ToolContext {
    Workspace& workspace;
    const KnowledgeBase* knowledge_base = nullptr;
    BuildGate* build_gate = nullptr;
    LogAnalyzerConfig log_config{};
};

struct ToolOutcome {
    ToolResult result;
    std::optional<BuildReport> build;  // set for validate_and_build
};

/// Runs the fixture's build command inside the workspace, holding a build-gate permit
/// (when a gate is given) for the duration of the process.
BuildReport run_build(const Workspace& ws, const ToolLimits& limits, BuildGate* gate = nullptr,
                      const LogAnalyzerConfig& log_config = {});

/// Agent-facing text for a build. Omits the duration so observations stay deterministic.
std::string render_build_report(const BuildReport& report);

/// Dispatches one agent tool call. Never throws: failures come back as status=error,
/// timeouts as status=tooltimeout.
ToolOutcome execute_tool(const ToolCall& call, ToolContext& ctx, const ToolLimits& limits);

}  // namespace repairenv
