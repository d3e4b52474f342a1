#include "repairenv/error_category.hpp"

#include <cctype>

namespace repairenv {

std::string_view to_string(ErrorCategory c) noexcept {
    switch (c) {
    case ErrorCategory::DependencyRelated: return "DependencyRelated";
    case ErrorCategory::BuildTool: return "BuildTool";
    case ErrorCategory::Test: return "Test";
    case ErrorCategory::Configuration: return "Configuration";
    case ErrorCategory::Installation: return "Installation";
    case ErrorCategory::Version: return "Version";
    case ErrorCategory::Environment: return "Environment";
    case ErrorCategory::Permission: return "Permission";
    case ErrorCategory::Other: return "Other";
    }
    return "Other";
}

std::optional<ErrorCategory> error_category_from_string(std::string_view s) noexcept {
    for (auto c : kAllErrorCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

const std::vector<std::string_view>& category_keywords(ErrorCategory c) {
    static const std::vector<std::string_view> dependency = {"dependency", "dependencies"};
    static const std::vector<std::string_view> build_tool = {"gradle", "maven", "build tool", "build failed",
                                                             "compilation failed"};
    static const std::vector<std::string_view> test = {"test", "unit test", "integration test", "test case",
                                                       "test failure"};
    static const std::vector<std::string_view> configuration = {"configuration", "config", "schema", "avsc",
                                                                "yaml", "yml", "json", "xml"};
    static const std::vector<std::string_view> installation = {"install", "yarn", "npm", "pip",
                                                               "package manager"};
    static const std::vector<std::string_view> version = {"version", "compatibility", "incompatible",
                                                          "mismatch"};
    static const std::vector<std::string_view> environment = {"path", "environment", "variable",
                                                              "not found", "cannot locate", "missing"};
    static const std::vector<std::string_view> permission = {"permission", "access", "denied", "forbidden"};
    static const std::vector<std::string_view> none;
    switch (c) {
    case ErrorCategory::DependencyRelated: return dependency;
    case ErrorCategory::BuildTool: return build_tool;
    case ErrorCategory::Test: return test;
    case ErrorCategory::Configuration: return configuration;
    case ErrorCategory::Installation: return installation;
    case ErrorCategory::Version: return version;
    case ErrorCategory::Environment: return environment;
    case ErrorCategory::Permission: return permission;
    case ErrorCategory::Other: return none;
    }
    return none;
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool contains_keyword(std::string_view haystack, std::string_view keyword, bool word_boundary) {
    for (auto pos = haystack.find(keyword); pos != std::string_view::npos;
         pos = haystack.find(keyword, pos + 1)) {
        if (!word_boundary) return true;
        const auto end = pos + keyword.size();
        const bool left = pos == 0 || !is_word_char(haystack[pos - 1]);
        const bool right = end == haystack.size() || !is_word_char(haystack[end]);
        if (left && right) return true;
    }
    return false;
}

}  // namespace

ErrorCategory categorize_error(std::string_view text, const CategorizeOptions& options) {
    std::string lowered(text);
    for (auto& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (auto c : kAllErrorCategories) {
        for (auto kw : category_keywords(c))
            if (contains_keyword(lowered, kw, options.word_boundary)) return c;
    }
    return ErrorCategory::Other;
}

}  // namespace repairenv
