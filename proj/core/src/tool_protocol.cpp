#include "repairenv/tool_protocol.hpp"

#include <variant>

#include "repairenv/error.hpp"

namespace repairenv {

using nlohmann::ordered_json;

const std::vector<ToolSchema>& tool_schemas() {
    static const std::vector<ToolSchema> schemas = {
        {tool::kFindFiles, "Find files by name or pattern.",
         {{"file_path", "string", true, "glob or filename to search"}}},
        {tool::kReadFile, "Read contents of a file.",
         {{"file_path", "string", true, "file name or path to read"}}},
        {tool::kWriteFile, "Write contents to an existing file while preserving structure and comments.",
         {{"file_path", "string", true, ""}, {"updated_contents", "string", true, ""}}},
        {tool::kRunSh, "Execute shell commands and return stdout/stderr.",
         {{"cmd", "string", true, "shell command to execute"}}},
        {tool::kUpgradeGradle, "Upgrade Gradle when builds fail due to deprecated versions.", {}},
        {tool::kFindFilesWithText, "Search for files containing a specific string.",
         {{"search_text", "string", true, ""}, {"glob_file_pattern", "string", false, ""}}},
        {tool::kRemoveDependency, "Remove a dependency from product-spec.json.",
         {{"dependency_name", "string", true, ""}}},
        {tool::kAskForHelp, "Query internal knowledge base for troubleshooting advice.",
         {{"troubleshooting_question", "string", true, ""}}},
        {tool::kDependencyUpgrade, "Run mint dependency update to upgrade libraries.",
         {{"dependency_to_upgrade", "string", true, ""}, {"version_to_upgrade_to", "string", false, ""}}},
        {tool::kValidateAndBuild, "Run a full build and return results.", {}},
    };
    return schemas;
}

const ToolSchema* find_schema(std::string_view name) {
    for (const auto& s : tool_schemas())
        if (s.name == name) return &s;
    return nullptr;
}

std::optional<std::string> ToolCall::argument(std::string_view key) const {
    if (!arguments.is_object()) return std::nullopt;
    auto it = arguments.find(std::string(key));
    if (it == arguments.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

std::string_view to_string(ToolStatus status) noexcept {
    switch (status) {
    case ToolStatus::Ok: return "ok";
    case ToolStatus::Error: return "error";
    case ToolStatus::ToolTimeout: return kToolTimeoutToken;
    }
    return "error";
}

ToolStatus tool_status_from_string(std::string_view s) {
    if (s == "ok") return ToolStatus::Ok;
    if (s == kToolTimeoutToken) return ToolStatus::ToolTimeout;
    if (s == "error") return ToolStatus::Error;
    throw Error(Errc::InvalidArgument, "unknown tool status " + std::string(s));
}

namespace {

constexpr std::string_view kWhitespace = " \t\r\n";

std::string_view trim(std::string_view s) {
    auto b = s.find_first_not_of(kWhitespace);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(kWhitespace);
    return s.substr(b, e - b + 1);
}

// JSON text in ", " / ": " style. "</" is written as "<\/" so a string value can
// never close the surrounding <tool_call> tag.
void write_json(std::string& out, const ordered_json& value) {
    if (value.is_object()) {
        out.push_back('{');
        bool first = true;
        for (const auto& [k, v] : value.items()) {
            if (!first) out += ", ";
            first = false;
            write_json(out, ordered_json(k));
            out += ": ";
            write_json(out, v);
        }
        out.push_back('}');
    } else if (value.is_array()) {
        out.push_back('[');
        bool first = true;
        for (const auto& v : value) {
            if (!first) out += ", ";
            first = false;
            write_json(out, v);
        }
        out.push_back(']');
    } else if (value.is_string()) {
        auto text = value.dump();
        std::string escaped;
        escaped.reserve(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            escaped.push_back(text[i]);
            if (text[i] == '<' && i + 1 < text.size() && text[i + 1] == '/') escaped.push_back('\\');
        }
        out += escaped;
    } else {
        out += value.dump();
    }
}

std::variant<ToolCall, std::string> parse_call_body(std::string_view body) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(trim(body));
    } catch (const nlohmann::json::exception& e) {
        return std::string("invalid JSON: ") + e.what();
    }
    if (!doc.is_object()) return std::string("tool call is not a JSON object");
    auto name = doc.find("name");
    if (name == doc.end() || !name->is_string() || name->get<std::string>().empty())
        return std::string("tool call has no \"name\" string");
    ToolCall call;
    call.name = name->get<std::string>();
    auto args = doc.find("arguments");
    if (args == doc.end() || args->is_null()) {
        call.arguments = ordered_json::object();
    } else if (args->is_object()) {
        call.arguments = *args;
    } else if (args->is_string()) {
        try {
            auto inner = ordered_json::parse(args->get<std::string>());
            if (!inner.is_object()) return std::string("\"arguments\" string is not a JSON object");
            call.arguments = std::move(inner);
        } catch (const nlohmann::json::exception&) {
            return std::string("\"arguments\" string is not valid JSON");
        }
    } else {
        return std::string("\"arguments\" must be an object");
    }
    call.source_text = std::string(body);
    return call;
}

}  // namespace

AssistantMessage parse_assistant(std::string_view raw) {
    AssistantMessage msg;
    msg.raw = std::string(raw);

    std::size_t pos = 0;
    const auto lead = raw.find_first_not_of(kWhitespace);
    if (lead != std::string_view::npos && raw.substr(lead).starts_with(kThinkOpen)) {
        const auto body = lead + kThinkOpen.size();
        const auto close = raw.find(kThinkClose, body);
        if (close != std::string_view::npos) {
            msg.thinking = std::string(raw.substr(body, close - body));
            pos = close + kThinkClose.size();
        }
    }

    std::vector<std::string_view> pieces;
    while (pos < raw.size()) {
        const auto open = raw.find(kToolCallOpen, pos);
        if (open == std::string_view::npos) break;
        const auto body = open + kToolCallOpen.size();
        const auto close = raw.find(kToolCallClose, body);
        if (close == std::string_view::npos) break;
        pieces.push_back(raw.substr(pos, open - pos));
        const auto text = raw.substr(body, close - body);
        auto parsed = parse_call_body(text);
        if (auto* call = std::get_if<ToolCall>(&parsed)) {
            call->offset = open;
            msg.tool_calls.push_back(std::move(*call));
        } else {
            msg.malformed.push_back({open, std::string(text), std::get<std::string>(parsed)});
        }
        pos = close + kToolCallClose.size();
    }
    if (pos < raw.size()) pieces.push_back(raw.substr(pos));

    for (auto p : pieces) {
        auto t = trim(p);
        if (t.empty()) continue;
        if (!msg.visible_text.empty()) msg.visible_text.push_back('\n');
        msg.visible_text.append(t);
    }
    return msg;
}

std::string serialize_tool_call(const ToolCall& call) {
    std::string out = "{\"name\": ";
    write_json(out, ordered_json(call.name));
    out += ", \"arguments\": ";
    write_json(out, call.arguments.is_object() ? call.arguments : ordered_json::object());
    out.push_back('}');
    return out;
}

std::string render_tool_call_block(const ToolCall& call) {
    return std::string(kToolCallOpen) + serialize_tool_call(call) + std::string(kToolCallClose);
}

std::string serialize_assistant(const AssistantMessage& message) {
    std::vector<std::string> parts;
    if (message.thinking) parts.push_back(std::string(kThinkOpen) + *message.thinking + std::string(kThinkClose));

    std::vector<std::string> blocks;
    for (const auto& c : message.tool_calls) blocks.push_back(render_tool_call_block(c));
    for (const auto& m : message.malformed)
        blocks.push_back(std::string(kToolCallOpen) + m.text + std::string(kToolCallClose));

    // Visible text goes first unless it would re-parse differently there: an unclosed
    // <tool_call> would swallow the following blocks, and a leading <think> would turn
    // into thinking.
    const bool visible_last =
        message.visible_text.find(kToolCallOpen) != std::string::npos ||
        (!message.thinking && std::string_view(message.visible_text).starts_with(kThinkOpen));
    if (!message.visible_text.empty() && !visible_last) parts.push_back(message.visible_text);
    for (auto& b : blocks) parts.push_back(std::move(b));
    if (!message.visible_text.empty() && visible_last) parts.push_back(message.visible_text);

    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += parts[i];
    }
    return out;
}

ValidatedCall validate_call(const ToolCall& call) {
    const auto* schema = find_schema(call.name);
    if (schema == nullptr) throw Error(Errc::UnknownTool, call.name);
    ValidatedCall out{call, schema, {}};
    const auto& args = call.arguments;
    for (const auto& p : schema->parameters) {
        auto it = args.find(std::string(p.name));
        if (it == args.end() || it->is_null()) {
            if (p.required) throw Error(Errc::MissingParameter, std::string(p.name));
            continue;
        }
        if (!it->is_primitive())
            throw Error(Errc::InvalidParameter, std::string(p.name) + " must be a " + std::string(p.type));
    }
    for (const auto& [key, _] : args.items()) {
        bool known = false;
        for (const auto& p : schema->parameters) known = known || p.name == key;
        if (!known) out.extra_parameters.push_back(key);
    }
    return out;
}

std::string render_system_prompt(std::string_view error_text, std::string_view fix_text,
                                  std::string_view repo_name) {
    std::string out;
    out += "You are a fully automated software agent tasked with independently fixing a build issue "
           "with a software project.\n\n";
    out += "Repository: ";
    out += repo_name;
    out += "\n\nBuild Error:\n";
    out += error_text;
    out += "\n\nRecommended Fix:\n";
    if (!fix_text.empty()) {
        out += fix_text;
        out += "\n";
    }
    out += "Apply the fix using the tools provided to fix the problem. Use the validate_and_build tool to "
           "verify the result of your work and act based on the results.\n\n";
    out += "Important Instructions:\n";
    out += "- DO NOT respond with suggestions, ask questions, or engage in a conversation.\n";
    out += "- DO NOT ask for confirmation or approval to apply the fix or perform any actions.\n";
    out += "- Never give up. Keep making decisions based on the information you have and keep taking "
           "action until the problem is fixed.\n\n";
    out += "Available Tools:\n";
    out += "The agent is provided with function signatures enclosed within <tools></tools> XML tags.\n";
    out += "<tools>\n";
    for (const auto& s : tool_schemas()) {
        out += s.name;
        out += ": ";
        out += s.description;
        out += "\nParameters: {";
        bool first = true;
        for (const auto& p : s.parameters) {
            if (!first) out += ", ";
            first = false;
            out += p.name;
            out += " (";
            out += p.type;
            if (!p.required) out += ", optional";
            out += ")";
            if (!p.description.empty()) {
                out += ": ";
                out += p.description;
            }
        }
        out += "}\n";
    }
    out += "</tools>\n\n";
    out += "Tool Call Format:\n";
    out += "Each tool invocation returns a JSON object wrapped in <tool_call></tool_call> tags.\n";
    out += "<tool_call>{\"name\": \"<function-name>\", \"arguments\": {...}}</tool_call>\n";
    return out;
}

std::string render_user_message(std::string_view fix_text) {
    return "Fix: " + std::string(fix_text);
}

std::string render_tool_result(const ToolResult& result) {
    std::string out = "<tool_response name=\"" + result.tool_name + "\" status=\"" +
                      std::string(to_string(result.status)) + "\">\n";
    if (result.status == ToolStatus::ToolTimeout && result.content.empty()) {
        out += std::string(kToolTimeoutToken) + ": the tool exceeded its time limit and was killed";
    } else {
        out += result.content;
    }
    if (out.back() != '\n') out.push_back('\n');
    out += "</tool_response>";
    return out;
}

}  // namespace repairenv
