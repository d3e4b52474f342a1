#include "repairenv/episode.hpp"

#include <algorithm>

#include "repairenv/error.hpp"

namespace repairenv {

std::string_view to_string(RewardMode m) noexcept {
    return m == RewardMode::BuildOnly ? "build_only" : "build_and_judge";
}

std::string_view to_string(TerminalReason r) noexcept {
    switch (r) {
    case TerminalReason::Success: return "success";
    case TerminalReason::ToolCap: return "tool_cap";
    case TerminalReason::TimeCap: return "time_cap";
    case TerminalReason::PolicyStop: return "policy_stop";
    case TerminalReason::InternalError: return "internal_error";
    }
    return "internal_error";
}

std::string_view to_string(Role r) noexcept {
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
    }
    return "system";
}

RewardMode reward_mode_from_string(std::string_view s) {
    if (s == "build_only") return RewardMode::BuildOnly;
    if (s == "build_and_judge") return RewardMode::BuildAndJudge;
    throw Error(Errc::ConfigError, "unknown reward mode " + std::string(s));
}

TerminalReason terminal_reason_from_string(std::string_view s) {
    for (auto r : {TerminalReason::Success, TerminalReason::ToolCap, TerminalReason::TimeCap,
                   TerminalReason::PolicyStop, TerminalReason::InternalError})
        if (to_string(r) == s) return r;
    throw Error(Errc::InvalidArgument, "unknown terminal reason " + std::string(s));
}

Role role_from_string(std::string_view s) {
    for (auto r : {Role::System, Role::User, Role::Assistant, Role::Tool})
        if (to_string(r) == s) return r;
    throw Error(Errc::InvalidArgument, "unknown role " + std::string(s));
}

EpisodeConfig EpisodeConfig::full() { return EpisodeConfig{}; }

EpisodeConfig EpisodeConfig::simplified() {
    EpisodeConfig c;
    c.max_tool_calls = 30;
    c.reward_mode = RewardMode::BuildOnly;
    return c;
}

void EpisodeConfig::validate() const {
    if (max_tool_calls < 1) throw Error(Errc::ConfigError, "max_tool_calls must be at least 1");
    if (discount != 1.0) throw Error(Errc::ConfigError, "discount is fixed at 1");
    if (max_wall_time.count() <= 0) throw Error(Errc::ConfigError, "max_wall_time must be positive");
}

std::size_t TokenCounts::total() const {
    std::size_t t = thinking + content;
    for (const auto& [_, n] : tool_call_emission) t += n;
    for (const auto& [_, n] : tool_response) t += n;
    return t;
}

std::map<std::string, std::size_t> TokenCounts::by_category() const {
    std::map<std::string, std::size_t> out;
    if (thinking) out["thinking"] = thinking;
    if (content) out["content"] = content;
    for (const auto& [tool_name, n] : tool_call_emission)
        if (n) out["tool_call:" + tool_name] += n;
    for (const auto& [tool_name, n] : tool_response)
        if (n) out[tool_name + "_response"] += n;
    return out;
}

TokenCounts& TokenCounts::operator+=(const TokenCounts& other) {
    thinking += other.thinking;
    content += other.content;
    for (const auto& [k, n] : other.tool_call_emission) tool_call_emission[k] += n;
    for (const auto& [k, n] : other.tool_response) tool_response[k] += n;
    return *this;
}

std::vector<std::string> Trajectory::tool_sequence() const {
    std::vector<std::string> seq;
    for (const auto& t : turns)
        if (t.role == Role::Tool && t.tool_result) seq.push_back(t.tool_result->tool_name);
    return seq;
}

std::size_t Trajectory::assistant_turns() const {
    return static_cast<std::size_t>(
        std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.role == Role::Assistant; }));
}

TokenCounts count_tokens(const Turn& turn, const Tokenizer& tokenizer) {
    TokenCounts counts;
    switch (turn.role) {
    case Role::System:
    case Role::User:
        counts.content = tokenizer.count(turn.raw);
        break;
    case Role::Tool: {
        const auto name = turn.tool_result ? turn.tool_result->tool_name : std::string("unknown");
        if (auto n = tokenizer.count(turn.raw)) counts.tool_response[name] = n;
        break;
    }
    case Role::Assistant: {
        const auto msg = parse_assistant(turn.raw);
        if (msg.thinking) counts.thinking = tokenizer.count(*msg.thinking);
        counts.content = tokenizer.count(msg.visible_text);
        for (const auto& c : msg.tool_calls)
            if (auto n = tokenizer.count(c.source_text)) counts.tool_call_emission[c.name] += n;
        for (const auto& m : msg.malformed)
            if (auto n = tokenizer.count(m.text)) counts.tool_call_emission["malformed"] += n;
        break;
    }
    }
    return counts;
}

int compute_reward(const BuildReport& build, const std::optional<JudgeVerdict>& verdict, RewardMode mode) {
    const bool built = build.status == BuildStatus::Success;
    if (mode == RewardMode::BuildOnly) return built ? 1 : 0;
    if (!verdict) throw Error(Errc::MissingVerdict, "build_and_judge reward needs a judge verdict");
    return built && verdict->approve ? 1 : 0;
}

namespace {

using Clock = std::chrono::steady_clock;

struct PendingItem {
    std::size_t offset;
    const ToolCall* call;
    const MalformedBlock* malformed;
};

class EpisodeRunner {
public:
    EpisodeRunner(const Problem& problem, Workspace& ws, Policy& policy, const EpisodeConfig& config,
                  const Judge* judge, const EpisodeEnv& env)
        : problem_(problem), ws_(ws), policy_(policy), config_(config), judge_(judge), env_(env),
          ctx_{ws, env.knowledge_base, env.build_gate, env.log_config} {}

    Trajectory run() {
        traj_.problem_id = problem_.id;
        config_.validate();
        if (config_.reward_mode == RewardMode::BuildAndJudge && judge_ == nullptr)
            throw Error(Errc::ConfigError, "build_and_judge reward mode needs a judge");

        push(Role::System, render_system_prompt(problem_.error_text, problem_.candidate_fix, ws_.fixture_id()));
        push(Role::User, render_user_message(problem_.candidate_fix));

        started_ = Clock::now();
        auto reason = loop();
        if (config_.skip_intermediate_builds && reason != TerminalReason::InternalError &&
            reason != TerminalReason::Success)
            reason = final_build().value_or(reason);
        finish(reason);
        return std::move(traj_);
    }

private:
    Seconds elapsed() const { return Clock::now() - started_; }
    bool out_of_time() const { return elapsed() >= config_.max_wall_time; }

    void push(Role role, std::string content, std::vector<ToolCall> calls = {},
              std::optional<ToolResult> result = std::nullopt, std::optional<BuildRecord> build = std::nullopt) {
        Turn t;
        t.role = role;
        t.raw = content;
        t.tool_calls = std::move(calls);
        t.tool_result = std::move(result);
        t.build = build;
        t.tokens = count_tokens(t, *env_.tokenizer);
        traj_.turns.push_back(std::move(t));
        messages_.push_back({role, std::move(content)});
    }

    TerminalReason loop() {
        for (;;) {
            if (out_of_time()) return TerminalReason::TimeCap;
            std::string raw;
            try {
                raw = policy_.next_message(messages_);
            } catch (const std::exception&) {
                return TerminalReason::InternalError;
            }
            auto msg = parse_assistant(raw);
            push(Role::Assistant, raw, msg.tool_calls);
            if (out_of_time()) return TerminalReason::TimeCap;
            if (msg.tool_calls.empty() && msg.malformed.empty()) return TerminalReason::PolicyStop;

            std::vector<PendingItem> items;
            for (const auto& c : msg.tool_calls) items.push_back({c.offset, &c, nullptr});
            for (const auto& m : msg.malformed) items.push_back({m.offset, nullptr, &m});
            std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });

            for (const auto& item : items) {
                if (traj_.tool_call_count >= config_.max_tool_calls) return TerminalReason::ToolCap;
                ++traj_.tool_call_count;
                if (auto done = step(item)) return *done;
                if (traj_.tool_call_count >= config_.max_tool_calls) return TerminalReason::ToolCap;
            }
        }
    }

    std::optional<TerminalReason> step(const PendingItem& item) {
        if (item.malformed != nullptr) {
            ToolResult r{"malformed", ToolStatus::Error, "Malformed tool call: " + item.malformed->reason};
            push(Role::Tool, render_tool_result(r), {}, r);
            return std::nullopt;
        }
        const auto& call = *item.call;

        if (config_.skip_intermediate_builds && call.name == tool::kValidateAndBuild) {
            ToolResult r{call.name, ToolStatus::Ok,
                         "Validation is deferred; the final state is built when the episode ends.\n"};
            push(Role::Tool, render_tool_result(r), {}, r);
            return std::nullopt;
        }

        // Tool time counts toward the episode clock, so no tool may outlive it.
        const auto remaining = std::max(Seconds(0.001), config_.max_wall_time - elapsed());
        ToolLimits limits = config_.tool_limits;
        limits.tool_timeout = std::min(limits.tool_timeout, remaining);
        limits.build_timeout = std::min(limits.build_timeout, remaining);

        auto outcome = execute_tool(call, ctx_, limits);
        std::optional<BuildRecord> record;
        std::optional<TerminalReason> done;
        if (outcome.build) {
            record = BuildRecord{outcome.build->status, outcome.build->duration_s};
            if (outcome.build->status == BuildStatus::Success) {
                std::optional<JudgeVerdict> verdict;
                if (config_.reward_mode == RewardMode::BuildAndJudge)
                    verdict = judge_->assess(ws_.fixture().pinned_tree, ws_.tree(), traj_);
                if (compute_reward(*outcome.build, verdict, config_.reward_mode) == 1) {
                    done = TerminalReason::Success;
                } else {
                    outcome.result.content += "The build passed but the change was rejected in review: " +
                                              verdict->reason + "\n";
                }
            }
        }
        push(Role::Tool, render_tool_result(outcome.result), {}, outcome.result, record);
        if (done) return done;
        if (out_of_time()) return TerminalReason::TimeCap;
        return std::nullopt;
    }

    std::optional<TerminalReason> final_build() {
        auto report = run_build(ws_, config_.tool_limits, env_.build_gate, env_.log_config);
        std::optional<JudgeVerdict> verdict;
        if (report.status == BuildStatus::Success && config_.reward_mode == RewardMode::BuildAndJudge)
            verdict = judge_->assess(ws_.fixture().pinned_tree, ws_.tree(), traj_);
        else if (config_.reward_mode == RewardMode::BuildAndJudge)
            verdict = JudgeVerdict{false, "build failed"};
        if (compute_reward(report, verdict, config_.reward_mode) == 1) return TerminalReason::Success;
        return std::nullopt;
    }

    void finish(TerminalReason reason) {
        traj_.terminal_reason = reason;
        traj_.reward = reason == TerminalReason::Success ? 1 : 0;
        traj_.wall_time_s = started_ == Clock::time_point{} ? 0.0 : elapsed().count();
        try {
            traj_.final_patch = extract_patch(ws_);
        } catch (const std::exception&) {
            traj_.final_patch.reset();
        }
    }

    const Problem& problem_;
    Workspace& ws_;
    Policy& policy_;
    const EpisodeConfig& config_;
    const Judge* judge_;
    const EpisodeEnv& env_;
    ToolContext ctx_;
    Trajectory traj_;
    std::vector<Message> messages_;
    Clock::time_point started_{};
};

}  // namespace

Trajectory run_episode(const Problem& problem, Workspace& workspace, Policy& policy, const EpisodeConfig& config,
                       const Judge* judge, const EpisodeEnv& env) {
    return EpisodeRunner(problem, workspace, policy, config, judge, env).run();
}

}  // namespace repairenv
