#include "repairenv/pipeline_full.hpp"

#include <algorithm>

#include "repairenv/error.hpp"

namespace repairenv {

void PipelineConfig::validate() const {
    if (loop_cap == 0) throw Error(Errc::ConfigError, "loop_cap must be at least 1");
    if (retry_cap == 0) throw Error(Errc::ConfigError, "retry_cap must be at least 1");
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
        throw Error(Errc::ConfigError, "similarity_threshold must be in (0, 1]");
    episode.validate();
}

void PipelineConfig::apply_json(const nlohmann::json& j) {
    try {
        if (j.contains("loop_cap")) loop_cap = j.at("loop_cap").get<std::size_t>();
        if (j.contains("retry_cap")) retry_cap = j.at("retry_cap").get<std::size_t>();
        if (j.contains("similarity_threshold")) similarity_threshold = j.at("similarity_threshold").get<double>();
        if (j.contains("error_patterns")) log_config.error_patterns = j.at("error_patterns").get<std::vector<std::string>>();
        if (j.contains("assertion_patterns"))
            judge_config.assertion_patterns = j.at("assertion_patterns").get<std::vector<std::string>>();
        if (j.contains("test_path_patterns"))
            judge_config.test_path_patterns = j.at("test_path_patterns").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, std::string("pipeline config: ") + e.what());
    }
}

std::string_view to_string(PipelineStatus s) noexcept { return s == PipelineStatus::Success ? "success" : "failure"; }

std::string_view to_string(PipelineOutcome o) noexcept {
    switch (o) {
    case PipelineOutcome::AlreadyGreen: return "already_green";
    case PipelineOutcome::Fixed: return "fixed";
    case PipelineOutcome::RetriesExhausted: return "retries_exhausted";
    case PipelineOutcome::LoopCapExceeded: return "loop_cap_exceeded";
    }
    return "retries_exhausted";
}

std::string_view to_string(LoopBranch b) noexcept {
    switch (b) {
    case LoopBranch::Fixed: return "fixed";
    case LoopBranch::JudgeRejected: return "judge_rejected";
    case LoopBranch::SimilarError: return "similar_error";
    case LoopBranch::NewError: return "new_error";
    }
    return "similar_error";
}

std::map<std::string, std::size_t> PipelineResult::attempts_per_signature() const {
    std::map<std::string, std::size_t> out;
    for (const auto& a : audit) out[a.error] = std::max(out[a.error], a.attempt);
    return out;
}

nlohmann::ordered_json PipelineResult::to_json(const std::vector<std::string>& episode_refs) const {
    nlohmann::ordered_json j;
    j["fixture_id"] = fixture_id;
    j["status"] = std::string(to_string(status));
    j["outcome"] = std::string(to_string(outcome));
    j["iterations"] = iterations;
    j["episodes"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < episodes.size(); ++i)
        j["episodes"].push_back(i < episode_refs.size() ? episode_refs[i] : episodes[i].problem_id);
    j["patches"] = nlohmann::ordered_json::array();
    if (patch) j["patches"].push_back({{"base_digest", patch->base_digest.hex}, {"diff", patch->to_unified()}});
    j["committed_snapshots"] = committed_snapshots;
    j["attempts_audit"] = nlohmann::ordered_json::array();
    for (const auto& a : audit) {
        j["attempts_audit"].push_back({{"iteration", a.iteration},
                                       {"error", a.error},
                                       {"attempt", a.attempt},
                                       {"solution_id", a.solution_id},
                                       {"episode_result", std::string(to_string(a.episode_result))},
                                       {"build_status", std::string(to_string(a.build_status))},
                                       {"next_error", a.next_error},
                                       {"branch", std::string(to_string(a.branch))},
                                       {"snapshot", a.snapshot},
                                       {"workspace_digest", a.workspace_digest}});
    }
    return j;
}

namespace {

class FullPipeline {
public:
    FullPipeline(FixtureRegistry& registry, const std::string& fixture_id, const std::string& run_id, Policy& policy,
                 const PipelineConfig& config, const PipelineEnv& env)
        : ws_(registry.materialize_workspace(fixture_id, run_id)),
          policy_(policy),
          config_(config),
          env_(env),
          default_judge_(judge_config_for(ws_.fixture(), config.judge_config)),
          judge_(env.judge != nullptr ? env.judge : &default_judge_) {
        result_.fixture_id = fixture_id;
        episode_env_.knowledge_base = env.knowledge_base;
        episode_env_.build_gate = env.build_gate;
        episode_env_.log_config = config.log_config;
        episode_env_.tokenizer = env.tokenizer;
    }

    PipelineResult run() {
        commit("base");
        auto report = build();
        if (report.status == BuildStatus::Success) {
            result_.status = PipelineStatus::Success;
            result_.outcome = PipelineOutcome::AlreadyGreen;
            result_.patch = extract_patch(ws_);
            return std::move(result_);
        }
        ranked_errors_ = report.top_errors;
        std::optional<ErrorSignature> current = ranked_errors_.front();

        for (;;) {
            if (attempts_[current->normalized] >= config_.retry_cap) current = next_unexhausted();
            if (!current) {
                result_.outcome = PipelineOutcome::RetriesExhausted;
                return std::move(result_);
            }
            if (result_.iterations >= config_.loop_cap) {
                result_.outcome = PipelineOutcome::LoopCapExceeded;
                return std::move(result_);
            }
            if (iterate(*current)) return std::move(result_);
            current = current_;
        }
    }

private:
    BuildReport build() {
        return run_build(ws_, config_.episode.tool_limits, env_.build_gate, config_.log_config);
    }

    void commit(const std::string& label) {
        snapshot(ws_, label);
        result_.committed_snapshots.push_back(label);
    }

    std::optional<ErrorSignature> next_unexhausted() const {
        for (const auto& e : ranked_errors_)
            if (attempts_.count(e.normalized) == 0 || attempts_.at(e.normalized) < config_.retry_cap) return e;
        return std::nullopt;
    }

    // Returns true when the loop is finished.
    bool iterate(const ErrorSignature& error) {
        const auto iteration = ++result_.iterations;
        const auto attempt = ++attempts_[error.normalized];

        std::string solution_id;
        std::string solution_text = "No recorded fix matches this error; diagnose it from the build output.";
        if (env_.knowledge_base != nullptr && !env_.knowledge_base->empty()) {
            const auto ranked = kb_lookup(*env_.knowledge_base, error.raw, env_.knowledge_base->entries().size());
            // Retries walk down the ranking and wrap around when it runs out.
            const auto& pick = ranked[next_solution_[error.normalized]++ % ranked.size()];
            solution_id = pick.entry->id;
            solution_text = pick.entry->fix_text;
        }

        Problem problem;
        problem.id = result_.fixture_id + "@" + std::to_string(iteration);
        problem.fixture_id = result_.fixture_id;
        problem.error_text = error.raw;
        problem.candidate_fix = solution_text;

        auto trajectory = run_episode(problem, ws_, policy_, config_.episode, judge_, episode_env_);
        const auto report = build();

        LoopAuditEntry entry;
        entry.iteration = iteration;
        entry.error = error.normalized;
        entry.attempt = attempt;
        entry.solution_id = solution_id;
        entry.episode_result = trajectory.terminal_reason;
        entry.build_status = report.status;

        bool done = false;
        current_ = error;
        if (report.status == BuildStatus::Success) {
            const auto verdict = judge_->assess(ws_.fixture().pinned_tree, ws_.tree(), trajectory);
            if (verdict.approve) {
                entry.branch = LoopBranch::Fixed;
                result_.status = PipelineStatus::Success;
                result_.outcome = PipelineOutcome::Fixed;
                result_.patch = extract_patch(ws_);
                done = true;
            } else {
                entry.branch = LoopBranch::JudgeRejected;
                restore(ws_, result_.committed_snapshots.back());
            }
        } else {
            const auto& next = report.top_errors.front();
            entry.next_error = next.normalized;
            // The worked-on error surviving anywhere in the log counts as similar too: an
            // escalated signature is not "new" just because an exhausted one still ranks first.
            const bool persists = std::any_of(report.top_errors.begin(), report.top_errors.end(), [&](const auto& e) {
                return similar(e, error, config_.similarity_threshold);
            });
            if (persists) {
                entry.branch = LoopBranch::SimilarError;
                restore(ws_, result_.committed_snapshots.back());
            } else {
                entry.branch = LoopBranch::NewError;
                commit("commit-" + std::to_string(iteration));
                ranked_errors_ = report.top_errors;
                current_ = next;
            }
        }
        entry.snapshot = result_.committed_snapshots.back();
        entry.workspace_digest = ws_.digest().hex;
        result_.audit.push_back(std::move(entry));
        result_.episodes.push_back(std::move(trajectory));
        return done;
    }

    Workspace ws_;
    Policy& policy_;
    const PipelineConfig& config_;
    const PipelineEnv& env_;
    HeuristicJudge default_judge_;
    const Judge* judge_;
    EpisodeEnv episode_env_;
    PipelineResult result_;
    std::vector<ErrorSignature> ranked_errors_;
    std::map<std::string, std::size_t> attempts_;
    std::map<std::string, std::size_t> next_solution_;
    ErrorSignature current_;
};

}  // namespace

PipelineResult run_full_pipeline(FixtureRegistry& registry, const std::string& fixture_id, const std::string& run_id,
                                 Policy& policy, const PipelineConfig& config, const PipelineEnv& env) {
    config.validate();
    return FullPipeline(registry, fixture_id, run_id, policy, config, env).run();
}

}  // namespace repairenv
