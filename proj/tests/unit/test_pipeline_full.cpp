#include <doctest.h>

#include "repairenv/error.hpp"
#include "repairenv/pipeline_full.hpp"
#include "repairenv/policy.hpp"
#include "support.hpp"

using namespace repairenv;
using testsupport::call;
using testsupport::Harness;

namespace {

struct Recording final : Policy {
    explicit Recording(std::vector<std::string> script, bool repeat = false) : inner(std::move(script), repeat) {}
    std::string next_message(const std::vector<Message>& messages) override {
        seen.push_back(messages);
        return inner.next_message(messages);
    }
    ScriptedPolicy inner;
    std::vector<std::vector<Message>> seen;
};

struct Setup {
    Harness h;
    KnowledgeBase kb = KnowledgeBase::load_jsonl(testsupport::repo_fixture_dir() / "kb.jsonl");
    PipelineEnv env;
    PipelineConfig config;

    Setup() { env.knowledge_base = &kb; }
};

std::size_t count_branch(const PipelineResult& r, LoopBranch b) {
    return static_cast<std::size_t>(
        std::count_if(r.audit.begin(), r.audit.end(), [b](const LoopAuditEntry& e) { return e.branch == b; }));
}

}  // namespace

TEST_CASE("top retrieved fix with a competent policy succeeds in one episode") {
    Setup s;
    auto fx = s.h.add_repo_fixture("gradle-deprecation");
    Recording policy({call("upgrade_gradle"), call("validate_and_build")});
    const auto r = run_full_pipeline(s.h.registry, fx->id, "full-1", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Success);
    CHECK(r.outcome == PipelineOutcome::Fixed);
    CHECK(r.iterations == 1);
    REQUIRE(r.episodes.size() == 1);
    CHECK(r.episodes[0].reward == 1);
    REQUIRE(r.audit.size() == 1);
    CHECK(r.audit[0].solution_id == "kb-gradle-upgrade");
    CHECK(r.audit[0].branch == LoopBranch::Fixed);
    CHECK(r.audit[0].attempt == 1);
    CHECK(r.committed_snapshots == std::vector<std::string>{"base"});

    // The episode was told the detected error and the retrieved fix.
    const auto& system = policy.seen.front()[0].content;
    CHECK(system.find("The Gradle version 5.6.4 used in the build has been deprecated") != std::string::npos);
    CHECK(system.find(s.kb.entries()[0].fix_text) != std::string::npos);

    // The patch replays onto a pristine copy and the build passes there.
    REQUIRE(r.patch);
    CHECK(r.patch->base_digest == fx->pinned_digest);
    testsupport::TempDir fresh;
    write_tree(fresh.path(), fx->pinned_tree);
    CHECK(testsupport::git_apply(fresh.path(), r.patch->to_unified()) == 0);
    CHECK(testsupport::shell("bash build.sh > /dev/null", fresh.path()) == 0);
}

TEST_CASE("two injected errors are fixed across committed snapshots") {
    Setup s;
    auto fx = s.h.add_repo_fixture("missing-dependency");
    // First episode only removes the retired artifact; the second handles the upgrade.
    struct Staged final : Policy {
        std::string next_message(const std::vector<Message>& m) override {
            const bool first_episode = m[0].content.find("legacy-logging") != std::string::npos;
            const std::size_t turn = (m.size() - 2) / 2;
            if (first_episode)
                return turn == 0 ? call("remove_dependency", {{"dependency_name", "legacy-logging"}}) : "done";
            if (turn == 0) return call("dependency_upgrade", {{"dependency_to_upgrade", "json-utils"}});
            return turn == 1 ? call("validate_and_build") : "done";
        }
    } policy;
    const auto r = run_full_pipeline(s.h.registry, fx->id, "two", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Success);
    CHECK(r.iterations == 2);
    REQUIRE(r.audit.size() == 2);
    CHECK(r.audit[0].branch == LoopBranch::NewError);
    CHECK(r.audit[0].snapshot == "commit-1");
    CHECK(r.audit[1].branch == LoopBranch::Fixed);
    CHECK(r.committed_snapshots == std::vector<std::string>{"base", "commit-1"});
    REQUIRE(r.patch);
    CHECK(r.patch->hunks.size() == 1);
    CHECK(r.patch->hunks[0].path == "product-spec.json");
}

TEST_CASE("an identically failing build gets exactly three attempts per signature") {
    Setup s;
    auto fx = s.h.add_repo_fixture("always-same-error");
    // The policy edits the tree each time; every similar branch must roll that back.
    Recording policy({call("run_sh", {{"cmd", "echo junk >> junk.txt"}}), "stop"});
    const auto r = run_full_pipeline(s.h.registry, fx->id, "same", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Failure);
    CHECK(r.outcome == PipelineOutcome::RetriesExhausted);
    const auto attempts = r.attempts_per_signature();
    CHECK(attempts.size() == 2);
    for (const auto& [sig, n] : attempts) CHECK(n == 3);
    CHECK(r.iterations == 6);
    CHECK(count_branch(r, LoopBranch::SimilarError) == 6);
    CHECK(r.committed_snapshots == std::vector<std::string>{"base"});
    for (const auto& a : r.audit) {
        CHECK(a.snapshot == "base");
        CHECK(a.workspace_digest == fx->pinned_digest.hex);
        CHECK(a.attempt <= s.config.retry_cap);
    }
    // Retries take the next-ranked fix.
    CHECK(r.audit[0].solution_id != r.audit[1].solution_id);
    CHECK(r.audit[1].solution_id != r.audit[2].solution_id);

    // Fresh context: every episode opens with exactly the system prompt and the fix.
    std::size_t openings = 0;
    for (const auto& conv : policy.seen)
        if (conv.size() == 2) ++openings;
    CHECK(openings == r.episodes.size());
    for (const auto& conv : policy.seen) {
        CHECK(conv[0].role == Role::System);
        CHECK(conv[0].content.find("junk") == std::string::npos);
    }
}

TEST_CASE("a fresh error every cycle stops at the loop cap") {
    Setup s;
    auto fx = s.h.add_repo_fixture("adversarial-distinct-errors");
    ScriptedPolicy policy({"nothing to do"});
    const auto r = run_full_pipeline(s.h.registry, fx->id, "adv", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Failure);
    CHECK(r.outcome == PipelineOutcome::LoopCapExceeded);
    CHECK(r.iterations == 100);
    CHECK(r.audit.size() == 100);
    CHECK(r.audit.back().iteration == 100);
    for (const auto& [_, n] : r.attempts_per_signature()) CHECK(n == 1);
    CHECK(count_branch(r, LoopBranch::NewError) == 100);
}

TEST_CASE("loop and retry caps are configurable") {
    Setup s;
    auto fx = s.h.add_repo_fixture("adversarial-distinct-errors");
    s.h.add_repo_fixture("always-same-error");
    ScriptedPolicy policy({"nothing"});
    s.config.loop_cap = 7;
    CHECK(run_full_pipeline(s.h.registry, fx->id, "cap7", policy, s.config, s.env).iterations == 7);
    s.config.loop_cap = 100;
    s.config.retry_cap = 1;
    const auto r = run_full_pipeline(s.h.registry, "always-same-error", "retry1", policy, s.config, s.env);
    CHECK(r.iterations == 2);
    s.config.retry_cap = 0;
    CHECK_THROWS_AS((void)run_full_pipeline(s.h.registry, "always-same-error", "retry0", policy, s.config, s.env),
                    Error);
}

TEST_CASE("judge rejection restores the last snapshot") {
    Setup s;
    auto fx = s.h.add_repo_fixture("broken-test");
    auto script = load_script_book(testsupport::repo_fixture_dir() / "scripts" / "delete-test.json");
    ScriptedPolicy policy = script.for_fixture(fx->id);
    const auto r = run_full_pipeline(s.h.registry, fx->id, "cheat", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Failure);
    // Each ranked signature of the initial log gets its three attempts.
    CHECK(count_branch(r, LoopBranch::JudgeRejected) == r.iterations);
    for (const auto& [_, n] : r.attempts_per_signature()) CHECK(n == 3);
    for (const auto& a : r.audit) {
        CHECK(a.build_status == BuildStatus::Success);
        CHECK(a.workspace_digest == fx->pinned_digest.hex);
    }
    CHECK_FALSE(r.patch);
}

TEST_CASE("green fixture needs no episode") {
    Setup s;
    testsupport::TempDir d;
    s.h.add(testsupport::write_fixture(d.path(), "green", {{"build.sh", "echo ok\n"}}));
    ScriptedPolicy policy({"unused"});
    const auto r = run_full_pipeline(s.h.registry, "green", "g", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Success);
    CHECK(r.outcome == PipelineOutcome::AlreadyGreen);
    CHECK(r.iterations == 0);
    CHECK(r.patch->empty());
}

TEST_CASE("empty knowledge base still drives episodes") {
    Setup s;
    s.env.knowledge_base = nullptr;
    auto fx = s.h.add_repo_fixture("gradle-deprecation");
    Recording policy({call("upgrade_gradle"), call("validate_and_build")});
    const auto r = run_full_pipeline(s.h.registry, fx->id, "nokb", policy, s.config, s.env);
    CHECK(r.status == PipelineStatus::Success);
    CHECK(r.audit[0].solution_id.empty());
    CHECK(policy.seen[0][1].content.find("No recorded fix") != std::string::npos);
}

TEST_CASE("pipeline config and result serialization") {
    PipelineConfig c;
    CHECK(c.loop_cap == 100);
    CHECK(c.retry_cap == 3);
    CHECK(c.similarity_threshold == 0.8);
    c.apply_json({{"loop_cap", 10}, {"similarity_threshold", 0.5}, {"test_path_patterns", {"spec"}}});
    CHECK(c.loop_cap == 10);
    CHECK(c.retry_cap == 3);
    CHECK(c.similarity_threshold == 0.5);
    CHECK(c.judge_config.test_path_patterns == std::vector<std::string>{"spec"});
    CHECK_THROWS_AS(c.apply_json({{"loop_cap", "many"}}), Error);
    c.similarity_threshold = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);

    Setup s;
    auto fx = s.h.add_repo_fixture("always-same-error");
    ScriptedPolicy policy({"no"});
    const auto r = run_full_pipeline(s.h.registry, fx->id, "json", policy, s.config, s.env);
    const auto j = r.to_json({"a.jsonl"});
    CHECK(j["status"] == "failure");
    CHECK(j["outcome"] == "retries_exhausted");
    CHECK(j["iterations"] == 6);
    CHECK(j["episodes"][0] == "a.jsonl");
    CHECK(j["episodes"][1] == "always-same-error@2");
    CHECK(j["patches"].empty());
    CHECK(j["attempts_audit"].size() == 6);
    CHECK(j["attempts_audit"][0]["branch"] == "similar_error");
    CHECK(j["attempts_audit"][0]["episode_result"] == "policy_stop");
}
