#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace repairenv {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kToolCallOpen = "<tool_call>";
inline constexpr std::string_view kToolCallClose = "</tool_call>";
inline constexpr std::string_view kToolTimeoutToken = "tooltimeout";

namespace tool {
inline constexpr std::string_view kFindFiles = "find_files";
inline constexpr std::string_view kReadFile = "read_file";
inline constexpr std::string_view kWriteFile = "write_file";
inline constexpr std::string_view kRunSh = "run_sh";
inline constexpr std::string_view kUpgradeGradle = "upgrade_gradle";
inline constexpr std::string_view kFindFilesWithText = "find_files_with_text";
inline constexpr std::string_view kRemoveDependency = "remove_dependency";
inline constexpr std::string_view kAskForHelp = "ask_for_help";
inline constexpr std::string_view kDependencyUpgrade = "dependency_upgrade";
inline constexpr std::string_view kValidateAndBuild = "validate_and_build";
}  // namespace tool

struct ParameterSchema {
    std::string_view name;
    std::string_view type;  // every agent-facing parameter is a string
    bool required;
    std::string_view description;
};

struct ToolSchema {
    std::string_view name;
    std::string_view description;
    std::vector<ParameterSchema> parameters;
};

/// The ten agent tools, in the order the system prompt lists them.
const std::vector<ToolSchema>& tool_schemas();
const ToolSchema* find_schema(std::string_view name);

/// Arguments keep their JSON scalar types and insertion order.
using ToolArguments = nlohmann::ordered_json;

struct ToolCall {
    std::string name;
    ToolArguments arguments = ToolArguments::object();
    std::size_t offset = 0;    // byte offset of the opening tag in the raw message
    std::string source_text;   // JSON text between the tags, verbatim

    /// String view of an argument: strings as-is, other scalars as their JSON text.
    [[nodiscard]] std::optional<std::string> argument(std::string_view key) const;

    friend bool operator==(const ToolCall& a, const ToolCall& b) {
        return a.name == b.name && a.arguments == b.arguments;
    }
};

struct MalformedBlock {
    std::size_t offset = 0;
    std::string text;    // JSON text between the tags
    std::string reason;

    friend bool operator==(const MalformedBlock& a, const MalformedBlock& b) { return a.text == b.text; }
};

struct AssistantMessage {
    std::optional<std::string> thinking;
    std::string visible_text;
    std::vector<ToolCall> tool_calls;
    std::vector<MalformedBlock> malformed;
    std::string raw;

    friend bool operator==(const AssistantMessage& a, const AssistantMessage& b) {
        return a.thinking == b.thinking && a.visible_text == b.visible_text && a.tool_calls == b.tool_calls &&
               a.malformed == b.malformed;
    }
};

enum class ToolStatus { Ok, Error, ToolTimeout };

std::string_view to_string(ToolStatus status) noexcept;
ToolStatus tool_status_from_string(std::string_view s);

struct ToolResult {
    std::string tool_name;
    ToolStatus status = ToolStatus::Ok;
    std::string content;

    friend bool operator==(const ToolResult&, const ToolResult&) = default;
};

/// Splits an assistant message into thinking, visible text and tool calls. A single
/// leading <think> block is thinking; any later one is visible text. Unparseable
/// <tool_call> bodies are collected in `malformed` and never stop the scan.
AssistantMessage parse_assistant(std::string_view raw);

/// Canonical text form; parse_assistant(serialize_assistant(m)) == m.
std::string serialize_assistant(const AssistantMessage& message);

/// One-line wire form: {"name": "...", "arguments": {...}}.
std::string serialize_tool_call(const ToolCall& call);
/// serialize_tool_call wrapped in <tool_call></tool_call>.
std::string render_tool_call_block(const ToolCall& call);

struct ValidatedCall {
    ToolCall call;
    const ToolSchema* schema = nullptr;
    std::vector<std::string> extra_parameters;
};

/// Throws Error(UnknownTool), Error(MissingParameter) or Error(InvalidParameter).
ValidatedCall validate_call(const ToolCall& call);

std::string render_system_prompt(std::string_view error_text, std::string_view fix_text,
                                 std::string_view repo_name);
std::string render_user_message(std::string_view fix_text);
std::string render_tool_result(const ToolResult& result);

}  // namespace repairenv
