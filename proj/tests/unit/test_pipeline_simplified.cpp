#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "repairenv/build_gate.hpp"
#include "repairenv/error.hpp"
#include "repairenv/pipeline_simplified.hpp"
#include "support.hpp"

using namespace repairenv;
using testsupport::call;
using testsupport::Harness;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::InvalidArgument;
}

std::vector<Problem> numbered(std::size_t n, const std::string& fixture = "fx") {
    std::vector<Problem> out;
    for (std::size_t i = 0; i < n; ++i) {
        Problem p;
        p.id = fixture + "#" + std::to_string(i);
        p.fixture_id = fixture;
        p.error_text = "error " + std::to_string(i);
        char ts[32];
        std::snprintf(ts, sizeof ts, "2024-01-%02zuT00:00:00Z", i + 1);
        p.created_at = ts;
        out.push_back(p);
    }
    return out;
}

PolicyFactory script_factory(std::vector<std::string> script) {
    auto book = std::make_shared<ScriptBook>();
    book->fallback = ScriptedPolicy(std::move(script));
    return scripted_policy_factory(book);
}

}  // namespace

TEST_CASE("expand_problems gives one problem per error") {
    const auto two = expand_problems("fx", {"e1", "e2"}, {"f1", "f2"}, "2024-01-01");
    REQUIRE(two.size() == 2);
    CHECK(two[0].id == "fx#0");
    CHECK(two[1].id == "fx#1");
    CHECK(two[1].error_text == "e2");
    CHECK(two[1].candidate_fix == "f2");
    CHECK(two[0].fixture_id == "fx");
    CHECK(two[0].created_at == "2024-01-01");
    CHECK(expand_problems("fx", {"e"}, {"f"}).size() == 1);
    CHECK(code_of([] { (void)expand_problems("fx", {"a", "b", "c"}, {"x", "y"}); }) == Errc::FixErrorArityMismatch);
    CHECK(code_of([] { (void)expand_problems("fx", {}, {}); }) == Errc::FixErrorArityMismatch);

    Harness h;
    auto fx = h.add_repo_fixture("missing-dependency");
    const auto from_fixture = expand_problems(*fx);
    REQUIRE(from_fixture.size() == 2);
    CHECK(from_fixture[0].error_text == fx->injected_errors[0].error_text);
    CHECK(from_fixture[1].candidate_fix == fx->injected_errors[1].candidate_fix);
}

TEST_CASE("build time filter keeps strictly faster fixtures") {
    std::vector<Problem> ps;
    for (const char* f : {"a", "b", "c"}) ps.push_back(Problem{std::string(f) + "#0", f, "", "", Split::Train, ""});
    const std::map<std::string, double> times{{"a", 50}, {"b", 99}, {"c", 150}};
    const auto kept = filter_by_build_time(ps, times, 100);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].fixture_id == "a");
    CHECK(kept[1].fixture_id == "b");
    CHECK(filter_by_build_time(ps, times, 0).empty());
    CHECK(filter_by_build_time(ps, times, std::numeric_limits<double>::infinity()) == ps);
    CHECK(filter_by_build_time(ps, {{"a", 100.0}, {"b", 1}, {"c", 1}}, 100).size() == 2);
    CHECK(code_of([&] { (void)filter_by_build_time(ps, {{"a", 1}}, 100); }) == Errc::NotFound);

    Harness h;
    h.add_repo_fixture("gradle-deprecation");
    h.registry.set_initial_build_time("gradle-deprecation", 120.0);
    const auto fx_problems = expand_problems(*h.registry.get("gradle-deprecation"));
    CHECK(filter_by_build_time(fx_problems, h.registry, 100).empty());
    CHECK(filter_by_build_time(fx_problems, h.registry, 121).size() == 1);
}

TEST_CASE("time ordered split") {
    auto ten = numbered(10);
    auto shuffled = ten;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(3));
    const auto s = split_time_ordered(shuffled);
    CHECK(s.train.size() == 8);
    CHECK(s.validation.size() == 1);
    CHECK(s.test.size() == 1);
    CHECK(s.train.front().id == "fx#0");
    CHECK(s.validation.front().id == "fx#8");
    CHECK(s.test.front().id == "fx#9");
    for (const auto& p : s.train) CHECK(p.split == Split::Train);
    CHECK(s.test.front().split == Split::Test);

    const auto again = split_time_ordered(ten);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);

    const auto one = split_time_ordered(numbered(1));
    CHECK(one.train.empty());
    CHECK(one.validation.empty());
    CHECK(one.test.size() == 1);

    const auto hundred = split_time_ordered(numbered(25));
    CHECK(hundred.train.size() == 20);  // floor(0.8 * 25)
    CHECK(hundred.validation.size() == 2);  // floor(0.9 * 25) - 20
    CHECK(hundred.test.size() == 3);

    CHECK(code_of([] { (void)split_time_ordered(numbered(3), {0.5, 0.5, 0.5}); }) == Errc::InvalidArgument);
    CHECK(code_of([] { (void)split_time_ordered(numbered(3), {1.2, -0.1, -0.1}); }) == Errc::InvalidArgument);
}

TEST_CASE("episode seeds") {
    CHECK(episode_seed(1, "p#0") == episode_seed(1, "p#0"));
    CHECK(episode_seed(1, "p#0") != episode_seed(2, "p#0"));
    CHECK(episode_seed(1, "p#0") != episode_seed(1, "p#1"));
    CHECK(episode_seed(1, "p#0", 0) != episode_seed(1, "p#0", 1));
}

TEST_CASE("run_batch returns problems times rollouts trajectories in order") {
    Harness h;
    auto fx = h.add_repo_fixture("gradle-deprecation");
    std::vector<Problem> problems;
    for (int i = 0; i < 8; ++i)
        problems.push_back(Problem{"g#" + std::to_string(i), fx->id, fx->injected_errors[0].error_text, "", Split::Test, ""});
    RolloutBatchConfig cfg;
    cfg.seed = 11;
    const auto rollouts =
        run_batch(h.registry, problems, script_factory({call("upgrade_gradle"), call("validate_and_build")}), cfg);
    REQUIRE(rollouts.size() == 32);
    std::set<std::uint64_t> seeds;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        CHECK(rollouts[i].problem_id == problems[i / 4].id);
        CHECK(rollouts[i].rollout == i % 4);
        CHECK(rollouts[i].seed == episode_seed(11, problems[i / 4].id, i % 4));
        CHECK(rollouts[i].trajectory.reward == 1);
        CHECK(rollouts[i].trajectory.tool_call_count == 2);
        seeds.insert(rollouts[i].seed);
    }
    CHECK(seeds.size() == 32);

    RolloutBatchConfig single;
    single.rollouts_per_problem = 1;
    single.run_label = "single";
    CHECK(run_batch(h.registry, {problems[0]}, script_factory({"no"}), single).size() == 1);
}

TEST_CASE("failures inside a rollout are recorded, not thrown") {
    Harness h;
    auto fx = h.add_repo_fixture("gradle-deprecation");
    std::vector<Problem> problems{Problem{"ghost#0", "ghost", "", "", Split::Test, ""},
                                  Problem{"g#0", fx->id, "", "", Split::Test, ""}};
    RolloutBatchConfig cfg;
    cfg.rollouts_per_problem = 1;
    const auto r = run_batch(h.registry, problems, script_factory({call("validate_and_build")}), cfg);
    REQUIRE(r.size() == 2);
    CHECK(r[0].trajectory.terminal_reason == TerminalReason::InternalError);
    CHECK(r[0].trajectory.reward == 0);
    CHECK(r[1].trajectory.terminal_reason == TerminalReason::PolicyStop);

    cfg.batch_size = 0;
    CHECK_THROWS_AS((void)run_batch(h.registry, problems, script_factory({}), cfg), Error);
}

TEST_CASE("build gate bounds concurrent builds") {
    Harness h;
    testsupport::TempDir d;
    const auto probe = d.path() / "probe.log";
    h.add(testsupport::write_fixture(d.path(), "sleepy", {{"build.sh", testsupport::probed_sleep_build(probe, 0.2)}}));
    auto problems = numbered(4, "sleepy");
    BuildGate gate(2);
    BatchEnv env;
    env.build_gate = &gate;
    RolloutBatchConfig cfg;
    cfg.rollouts_per_problem = 3;
    const auto r = run_batch(h.registry, problems, script_factory({call("validate_and_build")}), cfg,
                             EpisodeConfig::simplified(), env);
    CHECK(r.size() == 12);
    for (const auto& x : r) CHECK(x.trajectory.reward == 1);
    CHECK(gate.total_acquired() == 12);
    CHECK(gate.max_in_flight() == 2);
    CHECK(testsupport::max_overlap_from_probe(probe) <= 2);
    CHECK(testsupport::max_overlap_from_probe(probe) >= 1);
}

TEST_CASE("evaluation statistics") {
    auto flat = compute_eval_stats({0.2, 0.2, 0.2, 0.2, 0.2});
    CHECK(flat.mean == doctest::Approx(0.2));
    CHECK(flat.ci95_half_width == doctest::Approx(0.0));

    // Sample sd of [0,0,0,0,1] is sqrt(0.8 / 4) = 0.4472.
    auto skew = compute_eval_stats({0, 0, 0, 0, 1});
    CHECK(skew.mean == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::abs(skew.ci95_half_width - 1.96 * 0.4472135955 / 2.2360679775) < 1e-6);
    CHECK(std::abs(skew.ci95_half_width - 0.392) < 1e-3);

    CHECK(compute_eval_stats({0.7}).ci95_half_width == 0.0);
    CHECK_THROWS_AS((void)compute_eval_stats({}), Error);
    CHECK(EvalConfig{}.repeats == 5);
}

TEST_CASE("evaluate on a two problem split") {
    auto run = [](std::uint64_t seed) {
        Harness h;
        h.add_repo_fixture("gradle-deprecation");
        h.add_repo_fixture("always-same-error");
        auto split = load_problems(testsupport::repo_fixture_dir() / "problems.jsonl");
        auto book = std::make_shared<const ScriptBook>(
            load_script_book(testsupport::repo_fixture_dir() / "scripts" / "expert.json"));
        EvalConfig cfg;
        cfg.base_seed = seed;
        return evaluate(h.registry, split, scripted_policy_factory(book), cfg);
    };
    const auto report = run(7);
    CHECK(report.runs == std::vector<double>(5, 0.5));
    CHECK(report.mean == 0.5);
    CHECK(report.ci95_half_width == 0.0);
    CHECK(report.problem_count == 2);
    CHECK(report.per_problem.at("gradle-deprecation#0") == 5);
    CHECK(report.per_problem.at("always-same-error#0") == 0);
    const auto j = report.to_json();
    CHECK(j["config"]["repeats"] == 5);
    CHECK(j["config"]["max_tool_calls"] == 30);
    CHECK(j["config"]["reward_mode"] == "build_only");
    CHECK(j["ci_method"].get<std::string>().find("sample_sd") != std::string::npos);
    CHECK(run(7).to_json().dump() == j.dump());

    Harness h;
    CHECK_THROWS_AS((void)evaluate(h.registry, {}, script_factory({}), EvalConfig{}), Error);
}

TEST_CASE("problem files round trip") {
    testsupport::TempDir d;
    auto ps = numbered(3);
    ps[1].split = Split::Validation;
    ps[2].candidate_fix = "line\nbreak";
    save_problems(d.path() / "p.jsonl", ps);
    CHECK(load_problems(d.path() / "p.jsonl") == ps);
}
