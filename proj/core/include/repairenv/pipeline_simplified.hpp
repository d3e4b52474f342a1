#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repairenv/episode.hpp"
#include "repairenv/fixtures.hpp"
#include "repairenv/judge.hpp"
#include "repairenv/policy.hpp"

namespace repairenv {

struct RolloutBatchConfig {
    std::size_t batch_size = 8;
    std::size_t rollouts_per_problem = 4;
    std::size_t max_concurrent_builds = 32;
    std::uint64_t seed = 0;
    /// Prefix for rollout ids; must differ between batches sharing one registry.
    std::string run_label = "batch";

    /// Throws Error(ConfigError) when any count is zero.
    void validate() const;
};

/// One problem per (error, fix) pair, ids "<fixture>#<index>". Throws Error(FixErrorArityMismatch)
/// when the lists differ in length or are empty.
std::vector<Problem> expand_problems(const std::string& fixture_id, const std::vector<std::string>& errors,
                                     const std::vector<std::string>& fixes, const std::string& created_at = "");
/// Same, from the fixture's injected errors and their candidate fixes.
std::vector<Problem> expand_problems(const RepoFixture& fixture, const std::string& created_at = "");

/// Keeps problems whose fixture built in strictly less than `threshold_s` seconds.
/// Throws Error(NotFound) for a fixture without a recorded build time.
std::vector<Problem> filter_by_build_time(const std::vector<Problem>& problems,
                                          const std::map<std::string, double>& build_times, double threshold_s);
std::vector<Problem> filter_by_build_time(const std::vector<Problem>& problems, const FixtureRegistry& registry,
                                          double threshold_s);

struct SplitSets {
    std::vector<Problem> train;
    std::vector<Problem> validation;
    std::vector<Problem> test;
};

/// Sorts by (created_at, id); the first floor(r0*n) go to train, up to floor((r0+r1)*n) to
/// validation, the rest to test. Each problem's split field is set. Throws
/// Error(InvalidArgument) unless the ratios are non-negative and sum to 1.
SplitSets split_time_ordered(std::vector<Problem> problems, const std::array<double, 3>& ratios = {0.8, 0.1, 0.1});

/// FNV-1a over the run seed, the problem id and the rollout index.
std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& problem_id, std::size_t rollout = 0);

struct Rollout {
    std::string problem_id;
    std::size_t rollout = 0;
    std::uint64_t seed = 0;
    Trajectory trajectory;
};

struct BatchEnv {
    const KnowledgeBase* knowledge_base = nullptr;
    const Tokenizer* tokenizer = &default_tokenizer();
    /// Shared build gate; when null, run_batch makes one with max_concurrent_builds permits.
    BuildGate* build_gate = nullptr;
    HeuristicJudgeConfig judge_config{};
};

/// Runs every problem `rollouts_per_problem` times, batch_size problems at a time, each
/// rollout on its own thread and workspace. Results come back in (problem, rollout) order.
/// Failures inside a rollout are recorded in its trajectory, never thrown.
std::vector<Rollout> run_batch(FixtureRegistry& registry, const std::vector<Problem>& problems,
                               const PolicyFactory& policy, const RolloutBatchConfig& config,
                               const EpisodeConfig& episode_config = EpisodeConfig::simplified(),
                               const BatchEnv& env = {});

struct EvalStats {
    double mean = 0.0;
    double ci95_half_width = 0.0;
};

/// Mean of the run rates and 1.96 * sample standard deviation / sqrt(n); zero for n = 1.
EvalStats compute_eval_stats(const std::vector<double>& run_rates);

struct EvalConfig {
    std::size_t repeats = 5;
    std::uint64_t base_seed = 0;
    std::size_t batch_size = 8;
    std::size_t max_concurrent_builds = 32;
    std::string run_label = "eval";
    EpisodeConfig episode = EpisodeConfig::simplified();
};

struct EvalReport {
    std::vector<double> runs;
    double mean = 0.0;
    double ci95_half_width = 0.0;
    std::map<std::string, std::size_t> per_problem;
    std::size_t problem_count = 0;
    EvalConfig config;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Runs the whole split `repeats` times with seeds base_seed + run index, one rollout per
/// problem per run. Throws Error(InvalidArgument) for an empty split.
EvalReport evaluate(FixtureRegistry& registry, const std::vector<Problem>& split, const PolicyFactory& policy,
                    const EvalConfig& config, const BatchEnv& env = {});

}  // namespace repairenv
