#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace repairenv {

/// Build-error categories, declared in matching precedence order.
enum class ErrorCategory {
    DependencyRelated,
    BuildTool,
    Test,
    Configuration,
    Installation,
    Version,
    Environment,
    Permission,
    Other,
};

inline constexpr std::array<ErrorCategory, 9> kAllErrorCategories = {
    ErrorCategory::DependencyRelated, ErrorCategory::BuildTool,    ErrorCategory::Test,
    ErrorCategory::Configuration,     ErrorCategory::Installation, ErrorCategory::Version,
    ErrorCategory::Environment,       ErrorCategory::Permission,   ErrorCategory::Other,
};

std::string_view to_string(ErrorCategory c) noexcept;
std::optional<ErrorCategory> error_category_from_string(std::string_view s) noexcept;

/// Keyword list for a category; empty for Other.
const std::vector<std::string_view>& category_keywords(ErrorCategory c);

struct CategorizeOptions {
    /// Keywords must start and end on a word boundary ("test" no longer matches "latest").
    bool word_boundary = false;
};

/// Lowercased substring match against each category's keywords in precedence order;
/// the first category with any hit wins, otherwise Other.
ErrorCategory categorize_error(std::string_view text, const CategorizeOptions& options = {});

}  // namespace repairenv
