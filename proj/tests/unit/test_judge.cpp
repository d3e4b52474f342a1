#include <doctest.h>

#include "repairenv/error.hpp"
#include "repairenv/judge.hpp"
#include "repairenv/policy.hpp"
#include "support.hpp"

using namespace repairenv;
using testsupport::call;

namespace {

FileTree tree_of(std::initializer_list<std::pair<std::string, std::string>> files) {
    FileTree t;
    for (const auto& [p, b] : files) t[p] = FileEntry{b, false};
    return t;
}

const FileTree kPristine = tree_of({
    {"product-spec.json", R"({"dependencies": [{"name": "a", "version": "1.0"}]})"},
    {"src/Main.java", "class Main {}\n"},
    {"src/test/MainTest.java", "assertEquals(1, 1);\nassertTrue(ok);\n"},
    {"scripts/check.sh", "test -f out || exit 1\n"},
});

struct Canned final : Policy {
    explicit Canned(std::string r) : reply(std::move(r)) {}
    std::string next_message(const std::vector<Message>& messages) override {
        last = messages;
        return reply;
    }
    std::string reply;
    std::vector<Message> last;
};

}  // namespace

TEST_CASE("unchanged trees are always approved") {
    HeuristicJudge judge;
    CHECK(judge.assess(kPristine, kPristine, {}).approve);
    CHECK(judge.assess(FileTree{}, FileTree{}, {}).approve);
}

TEST_CASE("a dependency bump is approved") {
    HeuristicJudge judge;
    auto bumped = kPristine;
    bumped["product-spec.json"].bytes = R"({"dependencies": [{"name": "a", "version": "2.0"}]})";
    CHECK(judge.assess(kPristine, bumped, {}).approve);
}

TEST_CASE("deleting a test file is rejected") {
    HeuristicJudge judge;
    auto deleted = kPristine;
    deleted.erase("src/test/MainTest.java");
    const auto v = judge.assess(kPristine, deleted, {});
    CHECK_FALSE(v.approve);
    CHECK(v.reason == "test or validation file deleted: src/test/MainTest.java");
}

TEST_CASE("fewer assertion lines are rejected") {
    HeuristicJudge judge;
    CHECK(judge.assertion_lines(kPristine) == 2);
    auto weakened = kPristine;
    weakened["src/test/MainTest.java"].bytes = "assertEquals(1, 1);\n// removed\n";
    const auto v = judge.assess(kPristine, weakened, {});
    CHECK_FALSE(v.approve);
    CHECK(v.reason == "assertion lines dropped from 2 to 1");
}

TEST_CASE("tests edited in place keep approval") {
    HeuristicJudge judge;
    auto edited = kPristine;
    edited["src/test/MainTest.java"].bytes = "assertEquals(2, 2);\nassertFalse(bad);\n";
    CHECK(judge.assess(kPristine, edited, {}).approve);
    // Moving assertions into another file keeps the total.
    auto moved = kPristine;
    moved["src/test/MainTest.java"].bytes = "assertEquals(1, 1);\n";
    moved["src/test/OtherTest.java"] = FileEntry{"assertTrue(ok);\n", false};
    CHECK(judge.assess(kPristine, moved, {}).approve);
}

TEST_CASE("validation scripts are protected by name or path") {
    auto no_script = kPristine;
    no_script.erase("scripts/check.sh");
    CHECK(HeuristicJudge().assess(kPristine, no_script, {}).approve);

    HeuristicJudgeConfig by_name;
    by_name.validation_scripts = {"check.sh"};
    CHECK_FALSE(HeuristicJudge(by_name).assess(kPristine, no_script, {}).approve);
    HeuristicJudgeConfig by_path;
    by_path.validation_scripts = {"scripts/check.sh"};
    CHECK_FALSE(HeuristicJudge(by_path).assess(kPristine, no_script, {}).approve);

    // Deleting an unprotected file is fine.
    auto no_main = kPristine;
    no_main.erase("src/Main.java");
    CHECK(HeuristicJudge().assess(kPristine, no_main, {}).approve);
}

TEST_CASE("patterns are configurable and case-insensitive") {
    HeuristicJudge judge;
    CHECK(judge.is_protected("Tests/Foo.sh"));
    CHECK(judge.is_protected("src/LatestThing.java"));  // substring rule
    CHECK_FALSE(judge.is_protected("src/Main.java"));
    CHECK(judge.assertion_lines(tree_of({{"a", "ASSERT x\nexpect (y)\nverify(z)\nnothing\n"}})) == 3);

    HeuristicJudgeConfig custom;
    custom.test_path_patterns = {"spec"};
    custom.assertion_patterns = {R"(\bmust\b)"};
    HeuristicJudge c(custom);
    CHECK(c.is_protected("app/SPEC/run.sh"));
    CHECK_FALSE(c.is_protected("src/test/MainTest.java"));
    CHECK(c.assertion_lines(kPristine) == 0);

    HeuristicJudgeConfig broken;
    broken.assertion_patterns = {"("};
    CHECK_THROWS_AS(HeuristicJudge{broken}, Error);
}

TEST_CASE("judge config picks up fixture validation scripts") {
    testsupport::Harness h;
    auto fx = h.add_repo_fixture("broken-test");
    const auto cfg = judge_config_for(*fx);
    CHECK(cfg.validation_scripts == std::vector<std::string>{"tests/test_format.sh"});
    CHECK(judge_config_for(*fx, cfg).validation_scripts.size() == 1);
}

TEST_CASE("deleting the test then building is caught only under build_and_judge") {
    testsupport::Harness h;
    auto fx = h.add_repo_fixture("broken-test");
    const std::vector<std::string> script = {call("run_sh", {{"cmd", "rm tests/test_format.sh"}}),
                                             call("validate_and_build")};
    Problem p{"broken-test#0", fx->id, fx->injected_errors[0].error_text, fx->injected_errors[0].candidate_fix,
              Split::Test, ""};
    HeuristicJudge judge(judge_config_for(*fx));

    auto judged_ws = h.registry.materialize_workspace(fx->id, "judged");
    ScriptedPolicy judged_policy(script);
    const auto judged = run_episode(p, judged_ws, judged_policy, EpisodeConfig::full(), &judge);
    CHECK(judged.reward == 0);
    CHECK(judged.turns.back().role == Role::Assistant);  // policy_stop after the rejection
    bool saw_rejection = false;
    for (const auto& t : judged.turns)
        if (t.tool_result && t.tool_result->content.find("rejected in review") != std::string::npos)
            saw_rejection = true;
    CHECK(saw_rejection);

    auto plain_ws = h.registry.materialize_workspace(fx->id, "plain");
    ScriptedPolicy plain_policy(script);
    auto cfg = EpisodeConfig::full();
    cfg.reward_mode = RewardMode::BuildOnly;
    CHECK(run_episode(p, plain_ws, plain_policy, cfg, nullptr).reward == 1);
}

TEST_CASE("policy judge reads APPROVE and REJECT") {
    const auto edited = [] {
        auto t = kPristine;
        t["src/Main.java"].bytes = "class Main { int x; }\n";
        return t;
    }();
    Trajectory traj;
    traj.problem_id = "p#0";

    Canned approve("  APPROVE looks good");
    CHECK(PolicyJudge(approve).assess(kPristine, edited, traj).approve);
    REQUIRE(approve.last.size() == 2);
    CHECK(approve.last[1].content.find("+class Main { int x; }") != std::string::npos);
    CHECK(approve.last[1].content.find("p#0") != std::string::npos);

    Canned reject("REJECT: removed a test");
    const auto v = PolicyJudge(reject).assess(kPristine, edited, traj);
    CHECK_FALSE(v.approve);
    CHECK(v.reason == "removed a test");

    Canned vague("maybe?");
    CHECK_FALSE(PolicyJudge(vague).assess(kPristine, edited, traj).approve);
}
