#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "repairenv/analysis.hpp"
#include "repairenv/build_gate.hpp"
#include "repairenv/error.hpp"
#include "repairenv/fixtures.hpp"
#include "repairenv/knowledge_base.hpp"
#include "repairenv/pipeline_full.hpp"
#include "repairenv/pipeline_simplified.hpp"
#include "repairenv/policy.hpp"
#include "repairenv/trajectory_io.hpp"

namespace repairenv::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Config files may spell keys with '_' (loop_cap) or '-' (loop-cap).
class UnderscoreConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items) std::replace(item.name.begin(), item.name.end(), '_', '-');
        return items;
    }
};

struct Options {
    std::string fixture_root;
    std::vector<std::string> fixtures;
    std::string work_dir;
    std::string out_dir = "repairenv-out";
    std::string kb;
    std::string problems;
    std::string split = "test";
    std::string policy_script;
    std::string policy_endpoint;
    std::string policy_model;
    std::string logs;
    std::string compare_logs;
    std::uint64_t seed = 0;
    std::size_t max_tool_calls = 0;  // 0: the mode's default
    double max_wall_time = 4800;
    double tool_timeout = 3600;
    std::size_t loop_cap = 100;
    std::size_t retry_cap = 3;
    double similarity_threshold = 0.8;
    std::size_t max_concurrent_builds = 32;
    std::size_t batch_size = 8;
    std::size_t rollouts = 4;
    std::size_t repeats = 5;
    double build_time_filter = 100;
    std::vector<std::string> error_patterns;
    std::vector<std::string> assertion_patterns;
    std::vector<std::string> test_path_patterns;
    bool judge = false;
    bool no_judge = false;
    bool skip_intermediate_builds = false;
    bool no_timing = false;
    bool measure = false;
};

std::string safe_name(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out;
}

/// Records everything a command writes so that manifest.json can list it.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) throw Error(Errc::IoFailure, "cannot create " + root_.string() + ": " + ec.message());
    }

    void write(const std::string& rel, const std::string& content) {
        const auto path = root_ / rel;
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
        out << content;
        if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
        files_.insert(rel);
    }

    void write_json(const std::string& rel, const ordered_json& j) { write(rel, j.dump(2) + "\n"); }

    void finish(const std::string& command) {
        ordered_json m;
        m["command"] = command;
        m["files"] = std::vector<std::string>(files_.begin(), files_.end());
        write_json("manifest.json", m);
    }

    [[nodiscard]] const fs::path& root() const noexcept { return root_; }

private:
    fs::path root_;
    std::set<std::string> files_;
};

struct Environment {
    std::unique_ptr<FixtureRegistry> registry;
    std::unique_ptr<KnowledgeBase> kb;
    std::vector<std::string> fixture_ids;
};

Environment open_fixtures(const Options& o, bool require_ids) {
    if (o.fixture_root.empty()) throw Error(Errc::ConfigError, "--fixture-root is required");
    if (!fs::is_directory(o.fixture_root)) throw Error(Errc::ConfigError, "fixture root does not exist: " + o.fixture_root);
    Environment env;
    const fs::path work = o.work_dir.empty() ? fs::path(o.out_dir) / "work" : fs::path(o.work_dir);
    env.registry = std::make_unique<FixtureRegistry>(work / "workspaces", work / "cache");
    auto ids = env.registry->register_all(o.fixture_root);
    if (!o.fixtures.empty()) {
        for (const auto& id : o.fixtures)
            if (std::find(ids.begin(), ids.end(), id) == ids.end())
                throw Error(Errc::ConfigError, "unknown fixture " + id);
        ids = o.fixtures;
    }
    if (require_ids && ids.empty()) throw Error(Errc::ConfigError, "no fixtures under " + o.fixture_root);
    env.fixture_ids = ids;
    if (!o.kb.empty()) env.kb = std::make_unique<KnowledgeBase>(KnowledgeBase::load_jsonl(o.kb));
    return env;
}

PolicyFactory make_policy_factory(const Options& o) {
    if (o.policy_script.empty() == o.policy_endpoint.empty())
        throw Error(Errc::ConfigError, "give exactly one of --policy-script and --policy-endpoint");
    if (!o.policy_script.empty()) {
        if (!fs::is_regular_file(o.policy_script)) throw Error(Errc::ConfigError, "no such script " + o.policy_script);
        return scripted_policy_factory(std::make_shared<const ScriptBook>(load_script_book(o.policy_script)));
    }
    RemotePolicyConfig rc;
    rc.endpoint = o.policy_endpoint;
    rc.model = o.policy_model;
    rc.seed = o.seed;
    return remote_policy_factory(rc);
}

EpisodeConfig episode_config(const Options& o, EpisodeConfig base) {
    if (o.max_tool_calls != 0) base.max_tool_calls = o.max_tool_calls;
    base.max_wall_time = Seconds(o.max_wall_time);
    base.tool_limits.tool_timeout = Seconds(o.tool_timeout);
    base.tool_limits.build_timeout = Seconds(o.tool_timeout);
    base.skip_intermediate_builds = o.skip_intermediate_builds;
    if (o.judge) base.reward_mode = RewardMode::BuildAndJudge;
    if (o.no_judge) base.reward_mode = RewardMode::BuildOnly;
    base.validate();
    return base;
}

HeuristicJudgeConfig judge_config(const Options& o) {
    HeuristicJudgeConfig c;
    if (!o.assertion_patterns.empty()) c.assertion_patterns = o.assertion_patterns;
    if (!o.test_path_patterns.empty()) c.test_path_patterns = o.test_path_patterns;
    return c;
}

std::vector<Problem> load_split(const Options& o) {
    if (o.problems.empty()) throw Error(Errc::ConfigError, "--problems is required");
    if (!fs::is_regular_file(o.problems)) throw Error(Errc::ConfigError, "no such problem set " + o.problems);
    auto all = load_problems(o.problems);
    if (o.split == "all") return all;
    const auto wanted = split_from_string(o.split);
    std::vector<Problem> out;
    for (auto& p : all)
        if (p.split == wanted) out.push_back(std::move(p));
    return out;
}

TrajectoryWriteOptions write_options(const Options& o) {
    TrajectoryWriteOptions w;
    w.include_timing = !o.no_timing;
    return w;
}

int cmd_fixtures(const Options& o, std::ostream& out) {
    auto env = open_fixtures(o, true);
    OutputDir dir(o.out_dir);
    ordered_json list = ordered_json::array();
    for (const auto& id : env.fixture_ids) {
        if (o.measure) env.registry->measure_initial_build_time(id);
        const auto fx = env.registry->get(id);
        ordered_json j;
        j["id"] = id;
        j["source_digest"] = fx->source_digest.hex;
        j["pinned_digest"] = fx->pinned_digest.hex;
        j["injected_errors"] = fx->injected_errors.size();
        if (auto t = env.registry->initial_build_time(id)) j["initial_build_time_s"] = *t;
        else j["initial_build_time_s"] = nullptr;
        j["problems"] = ordered_json::array();
        try {
            for (const auto& p : expand_problems(*fx)) j["problems"].push_back(p.id);
        } catch (const Error& e) {
            if (e.code() != Errc::FixErrorArityMismatch) throw;
        }
        list.push_back(j);
        out << id << " " << fx->pinned_digest.hex << "\n";
    }
    dir.write_json("fixtures.json", list);
    dir.finish("fixtures");
    return kExitOk;
}

int cmd_full(const Options& o, std::ostream& out) {
    auto env = open_fixtures(o, true);
    auto factory = make_policy_factory(o);
    PipelineConfig pc;
    pc.loop_cap = o.loop_cap;
    pc.retry_cap = o.retry_cap;
    pc.similarity_threshold = o.similarity_threshold;
    if (!o.error_patterns.empty()) pc.log_config.error_patterns = o.error_patterns;
    pc.judge_config = judge_config(o);
    pc.episode = episode_config(o, EpisodeConfig::full());
    pc.validate();

    BuildGate gate(o.max_concurrent_builds);
    PipelineEnv penv;
    penv.knowledge_base = env.kb.get();
    penv.build_gate = &gate;

    OutputDir dir(o.out_dir);
    ordered_json summary = ordered_json::array();
    for (const auto& id : env.fixture_ids) {
        Problem anchor;
        anchor.id = id;
        anchor.fixture_id = id;
        auto policy = factory(anchor, episode_seed(o.seed, id));
        const auto result = run_full_pipeline(*env.registry, id, "full-" + id, *policy, pc, penv);
        std::vector<std::string> refs;
        for (std::size_t i = 0; i < result.episodes.size(); ++i) {
            const auto rel = "full/" + safe_name(id) + "/episode-" + std::to_string(i + 1) + ".jsonl";
            dir.write(rel, trajectory_to_jsonl(result.episodes[i], write_options(o)));
            refs.push_back(rel);
        }
        dir.write_json("full/" + safe_name(id) + "/result.json", result.to_json(refs));
        summary.push_back({{"fixture_id", id},
                           {"status", std::string(to_string(result.status))},
                           {"outcome", std::string(to_string(result.outcome))},
                           {"iterations", result.iterations}});
        out << id << ": " << to_string(result.status) << " (" << to_string(result.outcome) << ", "
            << result.iterations << " iterations)\n";
    }
    dir.write_json("full/summary.json", summary);
    dir.finish("full");
    return kExitOk;
}

int cmd_simplified(const Options& o, std::ostream& out) {
    auto env = open_fixtures(o, false);
    auto factory = make_policy_factory(o);
    auto problems = load_split(o);
    if (problems.empty()) throw Error(Errc::ConfigError, "split '" + o.split + "' has no problems");
    for (const auto& p : problems)
        if (!env.registry->initial_build_time(p.fixture_id)) env.registry->measure_initial_build_time(p.fixture_id);
    problems = filter_by_build_time(problems, *env.registry, o.build_time_filter);

    RolloutBatchConfig bc;
    bc.batch_size = o.batch_size;
    bc.rollouts_per_problem = o.rollouts;
    bc.max_concurrent_builds = o.max_concurrent_builds;
    bc.seed = o.seed;
    bc.run_label = "simplified";
    BatchEnv benv;
    benv.knowledge_base = env.kb.get();
    benv.judge_config = judge_config(o);

    OutputDir dir(o.out_dir);
    const auto rollouts = problems.empty()
                              ? std::vector<Rollout>{}
                              : run_batch(*env.registry, problems, factory, bc,
                                          episode_config(o, EpisodeConfig::simplified()), benv);
    ordered_json per_problem = ordered_json::object();
    std::size_t successes = 0;
    for (const auto& r : rollouts) {
        dir.write("simplified/trajectories/" + safe_name(r.problem_id) + "-r" + std::to_string(r.rollout) + ".jsonl",
                  trajectory_to_jsonl(r.trajectory, write_options(o)));
        if (!per_problem.contains(r.problem_id)) per_problem[r.problem_id] = 0;
        if (r.trajectory.succeeded()) {
            ++successes;
            per_problem[r.problem_id] = per_problem[r.problem_id].get<std::size_t>() + 1;
        }
    }
    ordered_json summary;
    summary["problems"] = problems.size();
    summary["rollouts"] = rollouts.size();
    summary["successes"] = successes;
    summary["success_rate"] = rollouts.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(rollouts.size());
    summary["per_problem"] = per_problem;
    dir.write_json("simplified/summary.json", summary);
    dir.finish("simplified");
    out << successes << "/" << rollouts.size() << " rollouts succeeded\n";
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    auto env = open_fixtures(o, false);
    auto factory = make_policy_factory(o);
    const auto split = load_split(o);
    if (split.empty()) throw Error(Errc::ConfigError, "split '" + o.split + "' has no problems");
    EvalConfig ec;
    ec.repeats = o.repeats;
    ec.base_seed = o.seed;
    ec.batch_size = o.batch_size;
    ec.max_concurrent_builds = o.max_concurrent_builds;
    ec.episode = episode_config(o, EpisodeConfig::simplified());
    BatchEnv benv;
    benv.knowledge_base = env.kb.get();
    benv.judge_config = judge_config(o);
    const auto report = evaluate(*env.registry, split, factory, ec, benv);
    OutputDir dir(o.out_dir);
    dir.write_json("eval_report.json", report.to_json());
    dir.finish("evaluate");
    out << "mean " << report.mean << " +/- " << report.ci95_half_width << " over " << report.runs.size() << " runs\n";
    return kExitOk;
}

std::vector<std::string> error_corpus(const std::vector<Trajectory>& trajectories) {
    std::vector<std::string> corpus;
    for (const auto& t : trajectories)
        if (auto e = prompt_error_text(t)) corpus.push_back(*e);
    return corpus;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    if (o.logs.empty()) throw Error(Errc::ConfigError, "--logs is required");
    auto load = [](const std::string& d) {
        try {
            return read_trajectory_dir(d);
        } catch (const Error& e) {
            if (e.code() == Errc::NotFound) throw Error(Errc::ConfigError, e.what());
            throw;
        }
    };
    const auto trajectories = load(o.logs);
    OutputDir dir(o.out_dir);
    const auto report = analysis_report(trajectories, error_corpus(trajectories));
    dir.write_json("analysis.json", report);
    dir.write("plot_data.csv", plot_data_csv(report));
    std::optional<TransitionMatrix> before;
    try {
        before = transition_matrix(trajectories);
        dir.write("transition_matrix.csv", before->to_csv());
    } catch (const Error& e) {
        if (e.code() != Errc::NoTransitions) throw;
    }
    if (!o.compare_logs.empty()) {
        const auto other = load(o.compare_logs);
        const auto report_b = analysis_report(other, error_corpus(other));
        dir.write_json("analysis_compare.json", report_b);
        dir.write("plot_data_compare.csv", plot_data_csv(report_b));
        try {
            const auto after = transition_matrix(other);
            dir.write("transition_matrix_compare.csv", after.to_csv());
            if (before) dir.write("transition_delta.csv", transition_delta_csv(*before, after));
        } catch (const Error& e) {
            if (e.code() != Errc::NoTransitions) throw;
        }
    }
    dir.finish("analyze");
    out << "analyzed " << trajectories.size() << " trajectories\n";
    return kExitOk;
}

void add_common(CLI::App& app, Options& o) {
    app.add_option("--fixture-root", o.fixture_root, "Directory whose subdirectories are fixtures");
    app.add_option("--fixture", o.fixtures, "Restrict to these fixture ids");
    app.add_option("--work-dir", o.work_dir, "Workspaces and pristine cache (default: <out-dir>/work)");
    app.add_option("--out-dir", o.out_dir, "Where results and manifest.json are written")->capture_default_str();
    app.add_option("--kb", o.kb, "Knowledge base (JSON lines)")->check(CLI::ExistingFile);
    app.add_option("--problems", o.problems, "Problem set (JSON lines)")->check(CLI::ExistingFile);
    app.add_option("--split", o.split, "train, validation, test or all")->capture_default_str();
    app.add_option("--policy-script", o.policy_script, "Scripted policy file")->check(CLI::ExistingFile);
    app.add_option("--policy-endpoint", o.policy_endpoint, "Chat-completion endpoint URL (key in $REPAIRENV_API_KEY)");
    app.add_option("--policy-model", o.policy_model, "Model name sent to the endpoint");
    app.add_option("--logs", o.logs, "Directory of trajectory logs")->check(CLI::ExistingDirectory);
    app.add_option("--compare-logs", o.compare_logs, "Second log directory for before/after comparison")
        ->check(CLI::ExistingDirectory);
    app.add_option("--seed", o.seed, "Base seed")->capture_default_str();
    app.add_option("--max-tool-calls", o.max_tool_calls, "Tool-call cap (default 50 full, 30 simplified)");
    app.add_option("--max-wall-time", o.max_wall_time, "Episode wall-time cap in seconds")->capture_default_str();
    app.add_option("--tool-timeout", o.tool_timeout, "Per-tool timeout in seconds")->capture_default_str();
    app.add_option("--loop-cap", o.loop_cap, "Repair-loop iteration cap")->capture_default_str();
    app.add_option("--retry-cap", o.retry_cap, "Attempts per error signature")->capture_default_str();
    app.add_option("--similarity-threshold", o.similarity_threshold, "Error similarity threshold in (0, 1]")
        ->capture_default_str();
    app.add_option("--max-concurrent-builds", o.max_concurrent_builds, "Build semaphore size")->capture_default_str();
    app.add_option("--batch-size", o.batch_size, "Problems per batch")->capture_default_str();
    app.add_option("--rollouts", o.rollouts, "Rollouts per problem")->capture_default_str();
    app.add_option("--repeats", o.repeats, "Evaluation repeats")->capture_default_str();
    app.add_option("--build-time-filter", o.build_time_filter, "Keep problems building faster than this (s)")
        ->capture_default_str();
    app.add_option("--error-patterns", o.error_patterns, "Log lines containing these are errors");
    app.add_option("--assertion-patterns", o.assertion_patterns, "Regexes for assertion lines");
    app.add_option("--test-path-patterns", o.test_path_patterns, "Substrings marking test files");
    app.add_flag("--judge", o.judge, "Use the build-and-judge reward");
    app.add_flag("--no-judge", o.no_judge, "Use the build-only reward");
    app.add_flag("--skip-intermediate-builds", o.skip_intermediate_builds,
                 "Defer validate_and_build to one build at episode end");
    app.add_flag("--no-timing", o.no_timing, "Leave durations out of trajectory logs");
    app.add_flag("--measure", o.measure, "fixtures: time each fixture's initial build");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Verifiable build-repair environment"};
    app.config_formatter(std::make_shared<UnderscoreConfig>());
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
    app.require_subcommand(1);
    Options o;
    add_common(app, o);
    auto* fixtures = app.add_subcommand("fixtures", "Register fixtures and list their digests");
    auto* full = app.add_subcommand("full", "Run the iterative repair loop on each fixture");
    auto* simplified = app.add_subcommand("simplified", "Batched one-shot rollouts over a problem split");
    auto* eval = app.add_subcommand("evaluate", "Repeated evaluation of a split with confidence intervals");
    auto* analyze = app.add_subcommand("analyze", "Statistics and transition matrices from trajectory logs");
    for (auto* s : {fixtures, full, simplified, eval, analyze}) s->fallthrough();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (o.judge && o.no_judge) throw Error(Errc::ConfigError, "--judge and --no-judge are exclusive");
        if (fixtures->parsed()) return cmd_fixtures(o, out);
        if (full->parsed()) return cmd_full(o, out);
        if (simplified->parsed()) return cmd_simplified(o, out);
        if (eval->parsed()) return cmd_evaluate(o, out);
        return cmd_analyze(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.code()) {
        case Errc::IoFailure:
        case Errc::PolicyUnreachable:
            return kExitIo;
        default:
            return kExitConfig;
        }
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

}  // namespace repairenv::cli
