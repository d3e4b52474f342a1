#include "repairenv/pipeline_simplified.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>

#include "repairenv/build_gate.hpp"
#include "repairenv/error.hpp"

namespace repairenv {

void RolloutBatchConfig::validate() const {
    if (batch_size == 0 || rollouts_per_problem == 0 || max_concurrent_builds == 0)
        throw Error(Errc::ConfigError, "batch_size, rollouts_per_problem and max_concurrent_builds must be at least 1");
}

std::vector<Problem> expand_problems(const std::string& fixture_id, const std::vector<std::string>& errors,
                                     const std::vector<std::string>& fixes, const std::string& created_at) {
    if (errors.empty() || errors.size() != fixes.size())
        throw Error(Errc::FixErrorArityMismatch, fixture_id + ": " + std::to_string(errors.size()) + " errors, " +
                                                     std::to_string(fixes.size()) + " fixes");
    std::vector<Problem> out;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        Problem p;
        p.id = fixture_id + "#" + std::to_string(i);
        p.fixture_id = fixture_id;
        p.error_text = errors[i];
        p.candidate_fix = fixes[i];
        p.created_at = created_at;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Problem> expand_problems(const RepoFixture& fixture, const std::string& created_at) {
    std::vector<std::string> errors;
    std::vector<std::string> fixes;
    for (const auto& e : fixture.injected_errors) {
        errors.push_back(e.error_text);
        if (!e.candidate_fix.empty()) fixes.push_back(e.candidate_fix);
    }
    return expand_problems(fixture.id, errors, fixes, created_at);
}

std::vector<Problem> filter_by_build_time(const std::vector<Problem>& problems,
                                          const std::map<std::string, double>& build_times, double threshold_s) {
    std::vector<Problem> out;
    for (const auto& p : problems) {
        auto it = build_times.find(p.fixture_id);
        if (it == build_times.end()) throw Error(Errc::NotFound, "no build time recorded for " + p.fixture_id);
        if (it->second < threshold_s) out.push_back(p);
    }
    return out;
}

std::vector<Problem> filter_by_build_time(const std::vector<Problem>& problems, const FixtureRegistry& registry,
                                          double threshold_s) {
    std::map<std::string, double> times;
    for (const auto& p : problems) {
        if (times.contains(p.fixture_id)) continue;
        auto t = registry.initial_build_time(p.fixture_id);
        if (!t) throw Error(Errc::NotFound, "no build time recorded for " + p.fixture_id);
        times[p.fixture_id] = *t;
    }
    return filter_by_build_time(problems, times, threshold_s);
}

SplitSets split_time_ordered(std::vector<Problem> problems, const std::array<double, 3>& ratios) {
    for (double r : ratios)
        if (!(r >= 0.0)) throw Error(Errc::InvalidArgument, "split ratios must be non-negative");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw Error(Errc::InvalidArgument, "split ratios must sum to 1");
    std::sort(problems.begin(), problems.end(), [](const Problem& a, const Problem& b) {
        return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
    });
    const auto n = problems.size();
    // The small epsilon keeps 0.8 * 10 from flooring to 7.
    auto boundary = [n](double fraction) {
        return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
    };
    const auto train_end = boundary(ratios[0]);
    const auto val_end = std::max(train_end, boundary(ratios[0] + ratios[1]));
    SplitSets out;
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = problems[i];
        if (i < train_end) {
            p.split = Split::Train;
            out.train.push_back(std::move(p));
        } else if (i < val_end) {
            p.split = Split::Validation;
            out.validation.push_back(std::move(p));
        } else {
            p.split = Split::Test;
            out.test.push_back(std::move(p));
        }
    }
    return out;
}

std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& problem_id, std::size_t rollout) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    mix(std::to_string(run_seed));
    mix("/");
    mix(problem_id);
    mix("/");
    mix(std::to_string(rollout));
    return h;
}

namespace {

Trajectory failed_trajectory(const Problem& p) {
    Trajectory t;
    t.problem_id = p.id;
    t.terminal_reason = TerminalReason::InternalError;
    return t;
}

Trajectory run_one(FixtureRegistry& registry, const Problem& problem, const std::string& rollout_id,
                   std::uint64_t seed, const PolicyFactory& factory, const EpisodeConfig& episode_config,
                   const BatchEnv& env, BuildGate* gate) {
    try {
        auto ws = registry.materialize_workspace(problem.fixture_id, rollout_id);
        auto policy = factory(problem, seed);
        std::optional<HeuristicJudge> judge;
        if (episode_config.reward_mode == RewardMode::BuildAndJudge)
            judge.emplace(judge_config_for(ws.fixture(), env.judge_config));
        EpisodeEnv eenv;
        eenv.knowledge_base = env.knowledge_base;
        eenv.build_gate = gate;
        eenv.tokenizer = env.tokenizer;
        return run_episode(problem, ws, *policy, episode_config, judge ? &*judge : nullptr, eenv);
    } catch (const std::exception&) {
        return failed_trajectory(problem);
    }
}

}  // namespace

std::vector<Rollout> run_batch(FixtureRegistry& registry, const std::vector<Problem>& problems,
                               const PolicyFactory& policy, const RolloutBatchConfig& config,
                               const EpisodeConfig& episode_config, const BatchEnv& env) {
    config.validate();
    episode_config.validate();
    std::unique_ptr<BuildGate> own_gate;
    BuildGate* gate = env.build_gate;
    if (gate == nullptr) {
        own_gate = std::make_unique<BuildGate>(config.max_concurrent_builds);
        gate = own_gate.get();
    }

    std::vector<Rollout> out(problems.size() * config.rollouts_per_problem);
    for (std::size_t start = 0; start < problems.size(); start += config.batch_size) {
        const auto end = std::min(problems.size(), start + config.batch_size);
        std::vector<std::thread> workers;
        for (std::size_t i = start; i < end; ++i) {
            for (std::size_t r = 0; r < config.rollouts_per_problem; ++r) {
                auto& slot = out[i * config.rollouts_per_problem + r];
                slot.problem_id = problems[i].id;
                slot.rollout = r;
                slot.seed = episode_seed(config.seed, problems[i].id, r);
                const auto rollout_id = config.run_label + "/" + problems[i].id + "/r" + std::to_string(r);
                workers.emplace_back([&, i, rollout_id] {
                    slot.trajectory =
                        run_one(registry, problems[i], rollout_id, slot.seed, policy, episode_config, env, gate);
                });
            }
        }
        for (auto& w : workers) w.join();
    }
    return out;
}

EvalStats compute_eval_stats(const std::vector<double>& run_rates) {
    if (run_rates.empty()) throw Error(Errc::InvalidArgument, "no runs to summarize");
    const auto n = static_cast<double>(run_rates.size());
    double sum = 0.0;
    for (double r : run_rates) sum += r;
    EvalStats s;
    s.mean = sum / n;
    if (run_rates.size() < 2) return s;
    double ss = 0.0;
    for (double r : run_rates) ss += (r - s.mean) * (r - s.mean);
    s.ci95_half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return s;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["runs"] = runs;
    j["mean"] = mean;
    j["ci95_half_width"] = ci95_half_width;
    j["ci_method"] = "normal approximation over run success rates: 1.96 * sample_sd / sqrt(repeats)";
    j["problem_count"] = problem_count;
    j["per_problem"] = nlohmann::ordered_json::object();
    for (const auto& [id, n] : per_problem) j["per_problem"][id] = n;
    j["config"] = {{"repeats", config.repeats},
                   {"base_seed", config.base_seed},
                   {"batch_size", config.batch_size},
                   {"max_concurrent_builds", config.max_concurrent_builds},
                   {"max_tool_calls", config.episode.max_tool_calls},
                   {"max_wall_time_s", config.episode.max_wall_time.count()},
                   {"reward_mode", std::string(to_string(config.episode.reward_mode))},
                   {"skip_intermediate_builds", config.episode.skip_intermediate_builds}};
    return j;
}

EvalReport evaluate(FixtureRegistry& registry, const std::vector<Problem>& split, const PolicyFactory& policy,
                    const EvalConfig& config, const BatchEnv& env) {
    if (split.empty()) throw Error(Errc::InvalidArgument, "evaluation split is empty");
    if (config.repeats == 0) throw Error(Errc::ConfigError, "repeats must be at least 1");
    EvalReport report;
    report.config = config;
    report.problem_count = split.size();
    for (const auto& p : split) report.per_problem[p.id] = 0;

    std::unique_ptr<BuildGate> own_gate;
    BatchEnv batch_env = env;
    if (batch_env.build_gate == nullptr) {
        own_gate = std::make_unique<BuildGate>(config.max_concurrent_builds);
        batch_env.build_gate = own_gate.get();
    }

    for (std::size_t run = 0; run < config.repeats; ++run) {
        RolloutBatchConfig bc;
        bc.batch_size = config.batch_size;
        bc.rollouts_per_problem = 1;
        bc.max_concurrent_builds = config.max_concurrent_builds;
        bc.seed = config.base_seed + run;
        bc.run_label = config.run_label + "-run" + std::to_string(run);
        const auto rollouts = run_batch(registry, split, policy, bc, config.episode, batch_env);
        std::size_t successes = 0;
        for (const auto& r : rollouts) {
            if (r.trajectory.succeeded()) {
                ++successes;
                ++report.per_problem[r.problem_id];
            }
        }
        report.runs.push_back(static_cast<double>(successes) / static_cast<double>(split.size()));
    }
    const auto stats = compute_eval_stats(report.runs);
    report.mean = stats.mean;
    report.ci95_half_width = stats.ci95_half_width;
    return report;
}

}  // namespace repairenv
