#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "repairenv/error.hpp"
#include "repairenv/policy.hpp"
#include "support.hpp"

using namespace repairenv;
using nlohmann::json;

namespace {

std::vector<Message> conversation(std::size_t assistant_turns) {
    std::vector<Message> m{{Role::System, "sys"}, {Role::User, "Fix: x"}};
    for (std::size_t i = 0; i < assistant_turns; ++i) {
        m.push_back({Role::Assistant, "a"});
        m.push_back({Role::Tool, "t"});
    }
    return m;
}

/// Local chat endpoint answering with a canned reply and recording each request.
struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::mutex mu;
    std::vector<json> requests;
    std::vector<std::string> auth_headers;
    std::string reply = R"({"content": "hello"})";
    int status = 200;

    FakeEndpoint() {
        server.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu);
            requests.push_back(json::parse(req.body));
            auth_headers.push_back(req.get_header_value("Authorization"));
            res.status = status;
            res.set_content(reply, "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint() {
        server.stop();
        thread.join();
    }
    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat"; }
};

}  // namespace

TEST_CASE("scripted policy replays by assistant turn count") {
    ScriptedPolicy p({"one", "two"});
    CHECK(p.next_message(conversation(0)) == "one");
    CHECK(p.next_message(conversation(1)) == "two");
    CHECK(p.next_message(conversation(2)) == kScriptExhaustedMessage);
    // Stateless: asking again gives the same answer.
    CHECK(p.next_message(conversation(0)) == "one");

    ScriptedPolicy cycle({"x", "y"}, true);
    CHECK(cycle.next_message(conversation(3)) == "y");
    CHECK(cycle.next_message(conversation(4)) == "x");
    CHECK_THROWS_AS(ScriptedPolicy({}, true), Error);
    CHECK(ScriptedPolicy({}).next_message(conversation(0)) == kScriptExhaustedMessage);
    CHECK(parse_assistant(kScriptExhaustedMessage).tool_calls.empty());
}

TEST_CASE("script files in all three forms") {
    testsupport::TempDir d;
    testsupport::write_text(d.path() / "array.json", R"(["a", "b"])");
    testsupport::write_text(d.path() / "object.json", R"({"messages": ["r"], "repeat": true})");
    testsupport::write_text(d.path() / "book.json",
                            R"({"default": ["fallback"], "by_fixture": {"fx": {"messages": ["special"]}}})");
    testsupport::write_text(d.path() / "bad.json", R"({"messages": 3})");
    testsupport::write_text(d.path() / "only.json", R"({"by_fixture": {"fx": ["z"]}})");

    auto array = load_script_book(d.path() / "array.json");
    CHECK(array.for_fixture("anything").script() == std::vector<std::string>{"a", "b"});
    auto object = load_script_book(d.path() / "object.json");
    CHECK(object.for_fixture("x").repeats());
    auto book = load_script_book(d.path() / "book.json");
    CHECK(book.for_fixture("fx").script() == std::vector<std::string>{"special"});
    CHECK(book.for_fixture("other").script() == std::vector<std::string>{"fallback"});
    CHECK_THROWS_AS((void)load_script_book(d.path() / "bad.json"), Error);
    CHECK_THROWS_AS((void)load_script_book(d.path() / "missing.json"), Error);
    auto only = load_script_book(d.path() / "only.json");
    try {
        (void)only.for_fixture("other");
        FAIL("expected NotFound");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NotFound);
    }
}

TEST_CASE("scripted factory picks the fixture's script") {
    auto book = std::make_shared<const ScriptBook>(
        load_script_book(testsupport::repo_fixture_dir() / "scripts" / "expert.json"));
    auto factory = scripted_policy_factory(book);
    Problem p{"gradle-deprecation#0", "gradle-deprecation", "", "", Split::Test, ""};
    auto policy = factory(p, 7);
    const auto first = parse_assistant(policy->next_message(conversation(0)));
    REQUIRE(first.tool_calls.size() == 1);
    CHECK(first.tool_calls[0].name == "upgrade_gradle");
}

TEST_CASE("remote policy speaks the chat wire format") {
    FakeEndpoint ep;
    ::setenv("REPAIRENV_TEST_KEY", "sekrit", 1);
    RemotePolicyConfig cfg;
    cfg.endpoint = ep.url();
    cfg.model = "m1";
    cfg.api_key_env = "REPAIRENV_TEST_KEY";
    cfg.seed = 42;
    RemotePolicy policy(cfg);
    CHECK(policy.next_message(conversation(1)) == "hello");

    REQUIRE(ep.requests.size() == 1);
    const auto& req = ep.requests[0];
    CHECK(req["model"] == "m1");
    CHECK(req["seed"] == 42);
    REQUIRE(req["messages"].size() == 4);
    CHECK(req["messages"][0] == json{{"role", "system"}, {"content", "sys"}});
    CHECK(req["messages"][2]["role"] == "assistant");
    CHECK(req["messages"][3]["role"] == "tool");
    CHECK(ep.auth_headers[0] == "Bearer sekrit");

    ep.reply = R"({"choices": [{"message": {"role": "assistant", "content": "from choices"}}]})";
    CHECK(policy.next_message(conversation(0)) == "from choices");

    ep.reply = R"({"unexpected": true})";
    CHECK_THROWS_AS((void)policy.next_message(conversation(0)), Error);
    ep.reply = R"({"content": "x"})";
    ep.status = 500;
    try {
        (void)policy.next_message(conversation(0));
        FAIL("expected PolicyUnreachable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::PolicyUnreachable);
    }
    ::unsetenv("REPAIRENV_TEST_KEY");
}

TEST_CASE("remote factory passes the episode seed") {
    FakeEndpoint ep;
    RemotePolicyConfig cfg;
    cfg.endpoint = ep.url();
    auto factory = remote_policy_factory(cfg);
    auto policy = factory(Problem{}, 99);
    (void)policy->next_message(conversation(0));
    REQUIRE(ep.requests.size() == 1);
    CHECK(ep.requests[0]["seed"] == 99);
    CHECK_FALSE(ep.requests[0].contains("model"));
}

TEST_CASE("unreachable endpoint ends the episode with internal_error") {
    // Grab a free port, then close it so nothing listens there.
    int port = 0;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    RemotePolicyConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/chat";
    cfg.timeout = std::chrono::seconds(2);
    RemotePolicy policy(cfg);
    try {
        (void)policy.next_message(conversation(0));
        FAIL("expected PolicyUnreachable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::PolicyUnreachable);
    }

    testsupport::Harness h;
    auto fx = h.add_repo_fixture("gradle-deprecation");
    auto ws = h.registry.materialize_workspace(fx->id, "remote");
    auto ecfg = EpisodeConfig::simplified();
    Problem p{"gradle-deprecation#0", fx->id, fx->injected_errors[0].error_text, "", Split::Test, ""};
    const auto t = run_episode(p, ws, policy, ecfg, nullptr);
    CHECK(t.terminal_reason == TerminalReason::InternalError);
    CHECK(t.reward == 0);

    CHECK_THROWS_AS(RemotePolicy(RemotePolicyConfig{"no-scheme", "", "X", std::chrono::seconds(1), 0}), Error);
}
