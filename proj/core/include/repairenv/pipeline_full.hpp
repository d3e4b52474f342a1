#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repairenv/episode.hpp"
#include "repairenv/fixtures.hpp"
#include "repairenv/judge.hpp"
#include "repairenv/knowledge_base.hpp"

namespace repairenv {

struct PipelineConfig {
    std::size_t loop_cap = 100;
    std::size_t retry_cap = 3;
    double similarity_threshold = 0.8;
    LogAnalyzerConfig log_config{};
    HeuristicJudgeConfig judge_config{};
    EpisodeConfig episode = EpisodeConfig::full();

    /// Throws Error(ConfigError) on zero caps or a threshold outside (0, 1].
    void validate() const;

    /// Reads loop_cap, retry_cap, similarity_threshold, error_patterns, assertion_patterns and
    /// test_path_patterns; absent keys keep their current values.
    void apply_json(const nlohmann::json& j);
};

enum class PipelineStatus { Success, Failure };
std::string_view to_string(PipelineStatus s) noexcept;

/// Why the loop stopped.
enum class PipelineOutcome { AlreadyGreen, Fixed, RetriesExhausted, LoopCapExceeded };
std::string_view to_string(PipelineOutcome o) noexcept;

/// What the loop did after re-validating an episode's work.
enum class LoopBranch { Fixed, JudgeRejected, SimilarError, NewError };
std::string_view to_string(LoopBranch b) noexcept;

struct LoopAuditEntry {
    std::size_t iteration = 0;        // 1-based
    std::string error;                // normalized signature the episode worked on
    std::size_t attempt = 0;          // 1-based attempt on that signature
    std::string solution_id;          // empty when the knowledge base had nothing
    TerminalReason episode_result = TerminalReason::InternalError;
    BuildStatus build_status = BuildStatus::Failure;
    std::string next_error;           // normalized top error of the re-validation build
    LoopBranch branch = LoopBranch::SimilarError;
    std::string snapshot;             // snapshot the workspace equals after this iteration
    std::string workspace_digest;     // digest after the branch was taken
};

struct PipelineResult {
    std::string fixture_id;
    PipelineStatus status = PipelineStatus::Failure;
    PipelineOutcome outcome = PipelineOutcome::RetriesExhausted;
    std::size_t iterations = 0;
    std::vector<Trajectory> episodes;
    std::vector<std::string> committed_snapshots;
    std::optional<Patch> patch;  // against the pinned tree; set on success
    std::vector<LoopAuditEntry> audit;

    [[nodiscard]] std::map<std::string, std::size_t> attempts_per_signature() const;

    /// {fixture_id, status, outcome, iterations, episodes, patches, committed_snapshots,
    /// attempts_audit}. `episode_refs` names the stored trajectory of each episode; when
    /// empty, episodes are listed by problem id.
    [[nodiscard]] nlohmann::ordered_json to_json(const std::vector<std::string>& episode_refs = {}) const;
};

struct PipelineEnv {
    const KnowledgeBase* knowledge_base = nullptr;
    BuildGate* build_gate = nullptr;
    const Tokenizer* tokenizer = &default_tokenizer();
    /// Overrides the heuristic judge built from the fixture.
    const Judge* judge = nullptr;
};

/// The repair loop for one fixture: build; on failure analyze the log, retrieve a fix, run an
/// episode with fresh context, rebuild and branch on the outcome. A new error commits the
/// workspace as a snapshot; a similar error restores the last snapshot and retries with the
/// next-ranked fix. Each signature gets retry_cap attempts; the loop stops at loop_cap.
/// `run_id` names the workspace and must be unique within the registry.
PipelineResult run_full_pipeline(FixtureRegistry& registry, const std::string& fixture_id,
                                 const std::string& run_id, Policy& policy, const PipelineConfig& config,
                                 const PipelineEnv& env);

}  // namespace repairenv
