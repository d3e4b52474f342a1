#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "repairenv/episode.hpp"

namespace repairenv {

/// Sent once a script runs out. Contains no tool call, so the episode ends with policy_stop.
inline constexpr const char* kScriptExhaustedMessage = "I have no further actions to take.";

/// Replays a fixed list of assistant messages. The reply is chosen from the number of
/// assistant messages already in the conversation, so one instance may serve many
/// episodes and threads at once.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> messages, bool repeat = false);

    std::string next_message(const std::vector<Message>& messages) override;

    [[nodiscard]] const std::vector<std::string>& script() const noexcept { return messages_; }
    [[nodiscard]] bool repeats() const noexcept { return repeat_; }

private:
    std::vector<std::string> messages_;
    bool repeat_;
};

/// A script file holds either a JSON array of messages, `{"messages": [...], "repeat": bool}`,
/// or `{"default": <script>, "by_fixture": {"<fixture id>": <script>}}` where each <script>
/// takes one of the first two forms.
struct ScriptBook {
    std::optional<ScriptedPolicy> fallback;
    std::map<std::string, ScriptedPolicy> by_fixture;

    /// Throws Error(NotFound) when neither a per-fixture nor a default script exists.
    [[nodiscard]] const ScriptedPolicy& for_fixture(const std::string& fixture_id) const;
};

ScriptBook load_script_book(const std::filesystem::path& path);

struct RemotePolicyConfig {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string model;
    std::string api_key_env = "REPAIRENV_API_KEY";
    std::chrono::seconds timeout{600};
    std::uint64_t seed = 0;
};

/// Chat-completion call per step: POST {model, messages:[{role, content}], seed} and read
/// back either {content} or {choices:[{message:{content}}]}.
class RemotePolicy final : public Policy {
public:
    explicit RemotePolicy(RemotePolicyConfig config);
    std::string next_message(const std::vector<Message>& messages) override;

    [[nodiscard]] const RemotePolicyConfig& config() const noexcept { return config_; }

private:
    RemotePolicyConfig config_;
    std::string base_;
    std::string path_;
};

/// Builds the policy for one episode. Runners call it once per (problem, rollout).
using PolicyFactory = std::function<std::unique_ptr<Policy>(const Problem& problem, std::uint64_t seed)>;

PolicyFactory scripted_policy_factory(std::shared_ptr<const ScriptBook> book);
PolicyFactory remote_policy_factory(RemotePolicyConfig config);

}  // namespace repairenv
