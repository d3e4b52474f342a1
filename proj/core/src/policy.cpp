#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "repairenv/policy.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "repairenv/error.hpp"

namespace repairenv {

using nlohmann::json;

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> messages, bool repeat)
    : messages_(std::move(messages)), repeat_(repeat) {
    if (repeat_ && messages_.empty())
        throw Error(Errc::InvalidArgument, "a repeating script needs at least one message");
}

std::string ScriptedPolicy::next_message(const std::vector<Message>& messages) {
    const auto step = static_cast<std::size_t>(std::count_if(
        messages.begin(), messages.end(), [](const Message& m) { return m.role == Role::Assistant; }));
    if (step < messages_.size()) return messages_[step];
    if (repeat_) return messages_[step % messages_.size()];
    return kScriptExhaustedMessage;
}

const ScriptedPolicy& ScriptBook::for_fixture(const std::string& fixture_id) const {
    if (auto it = by_fixture.find(fixture_id); it != by_fixture.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(Errc::NotFound, "no script for fixture " + fixture_id);
}

namespace {

ScriptedPolicy script_from_json(const json& j) {
    if (j.is_array()) return ScriptedPolicy(j.get<std::vector<std::string>>());
    if (j.is_object() && j.contains("messages"))
        return ScriptedPolicy(j.at("messages").get<std::vector<std::string>>(), j.value("repeat", false));
    throw Error(Errc::ConfigError, "script must be an array of messages or {messages, repeat}");
}

}  // namespace

ScriptBook load_script_book(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open script " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, "invalid script " + path.string() + ": " + e.what());
    }
    ScriptBook book;
    try {
        if (j.is_object() && (j.contains("default") || j.contains("by_fixture"))) {
            if (j.contains("default")) book.fallback = script_from_json(j.at("default"));
            if (j.contains("by_fixture"))
                for (const auto& [id, s] : j.at("by_fixture").items()) book.by_fixture.emplace(id, script_from_json(s));
        } else {
            book.fallback = script_from_json(j);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, "invalid script " + path.string() + ": " + e.what());
    }
    return book;
}

RemotePolicy::RemotePolicy(RemotePolicyConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw Error(Errc::ConfigError, "policy endpoint needs a scheme: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

std::string RemotePolicy::next_message(const std::vector<Message>& messages) {
    json body = json::object();
    if (!config_.model.empty()) body["model"] = config_.model;
    body["messages"] = json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    body["seed"] = config_.seed;

    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw Error(Errc::PolicyUnreachable, "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(Errc::PolicyUnreachable, "policy endpoint returned HTTP " + std::to_string(res->status));
    try {
        const auto reply = json::parse(res->body);
        if (reply.contains("content")) return reply.at("content").get<std::string>();
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::PolicyUnreachable, std::string("unreadable policy reply: ") + e.what());
    }
}

PolicyFactory scripted_policy_factory(std::shared_ptr<const ScriptBook> book) {
    return [book = std::move(book)](const Problem& problem, std::uint64_t) -> std::unique_ptr<Policy> {
        return std::make_unique<ScriptedPolicy>(book->for_fixture(problem.fixture_id));
    };
}

PolicyFactory remote_policy_factory(RemotePolicyConfig config) {
    return [config = std::move(config)](const Problem&, std::uint64_t seed) -> std::unique_ptr<Policy> {
        auto c = config;
        c.seed = seed;
        return std::make_unique<RemotePolicy>(std::move(c));
    };
}

}  // namespace repairenv
