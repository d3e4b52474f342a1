#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repairenv/fixtures.hpp"
#include "repairenv/problem.hpp"
#include "repairenv/tokenizer.hpp"
#include "repairenv/tools.hpp"

namespace repairenv {

enum class RewardMode { BuildOnly, BuildAndJudge };
enum class TerminalReason { Success, ToolCap, TimeCap, PolicyStop, InternalError };
enum class Role { System, User, Assistant, Tool };

std::string_view to_string(RewardMode m) noexcept;
std::string_view to_string(TerminalReason r) noexcept;
std::string_view to_string(Role r) noexcept;
RewardMode reward_mode_from_string(std::string_view s);
TerminalReason terminal_reason_from_string(std::string_view s);
Role role_from_string(std::string_view s);

struct EpisodeConfig {
    std::size_t max_tool_calls = 50;
    Seconds max_wall_time{4800};
    double discount = 1.0;
    RewardMode reward_mode = RewardMode::BuildAndJudge;
    ToolLimits tool_limits{};
    /// validate_and_build calls are acknowledged but not run; one build decides the
    /// reward when the episode ends.
    bool skip_intermediate_builds = false;

    /// 50 tool calls, 80 minutes, build and judge.
    static EpisodeConfig full();
    /// 30 tool calls, build-only reward.
    static EpisodeConfig simplified();

    /// Throws Error(ConfigError) on a zero tool-call cap or a discount other than 1.
    void validate() const;
};

struct Message {
    Role role;
    std::string content;
};

struct TokenCounts {
    std::size_t thinking = 0;
    std::size_t content = 0;
    std::map<std::string, std::size_t> tool_call_emission;  // by tool name
    std::map<std::string, std::size_t> tool_response;       // by tool name

    [[nodiscard]] std::size_t total() const;
    /// "thinking", "content", "tool_call:<tool>", "<tool>_response"; zero entries omitted.
    [[nodiscard]] std::map<std::string, std::size_t> by_category() const;
    TokenCounts& operator+=(const TokenCounts& other);

    friend bool operator==(const TokenCounts&, const TokenCounts&) = default;
};

struct BuildRecord {
    BuildStatus status = BuildStatus::Failure;
    double duration_s = 0.0;
};

struct Turn {
    Role role = Role::System;
    std::string raw;
    std::vector<ToolCall> tool_calls;
    std::optional<ToolResult> tool_result;
    TokenCounts tokens;
    std::optional<BuildRecord> build;
};

struct Trajectory {
    std::string problem_id;
    std::vector<Turn> turns;
    TerminalReason terminal_reason = TerminalReason::InternalError;
    int reward = 0;
    double wall_time_s = 0.0;
    std::size_t tool_call_count = 0;
    std::optional<Patch> final_patch;

    [[nodiscard]] std::vector<std::string> tool_sequence() const;
    [[nodiscard]] std::size_t assistant_turns() const;
    [[nodiscard]] bool succeeded() const noexcept { return reward == 1; }
};

/// Per-category token counts of one turn. The categories partition the turn:
/// total() == tokenizer.count(turn.raw).
TokenCounts count_tokens(const Turn& turn, const Tokenizer& tokenizer = default_tokenizer());

/// Produces the next raw assistant message for a conversation.
class Policy {
public:
    virtual ~Policy() = default;
    /// Throws Error(PolicyUnreachable) when the backing model cannot be reached.
    virtual std::string next_message(const std::vector<Message>& messages) = 0;
};

struct JudgeVerdict {
    bool approve = true;
    std::string reason;
};

/// Post-build review of a change.
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeVerdict assess(const FileTree& pristine, const FileTree& final_tree,
                                const Trajectory& trajectory) const = 0;
};

/// Throws Error(MissingVerdict) in build-and-judge mode without a verdict.
int compute_reward(const BuildReport& build, const std::optional<JudgeVerdict>& verdict, RewardMode mode);

struct EpisodeEnv {
    const KnowledgeBase* knowledge_base = nullptr;
    BuildGate* build_gate = nullptr;
    LogAnalyzerConfig log_config{};
    const Tokenizer* tokenizer = &default_tokenizer();
};

/// One conversation: system prompt for the problem, then policy messages alternating with
/// tool executions until success, a cap, a tool-free message, or a policy failure.
Trajectory run_episode(const Problem& problem, Workspace& workspace, Policy& policy,
                       const EpisodeConfig& config, const Judge* judge, const EpisodeEnv& env = {});

}  // namespace repairenv
