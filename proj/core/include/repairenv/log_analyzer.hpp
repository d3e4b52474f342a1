#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "repairenv/error_category.hpp"

namespace repairenv {

struct ErrorSignature {
    std::string raw;         // first log line seen with this normalized form
    std::string normalized;  // paths, hashes, versions and numbers masked
    ErrorCategory category = ErrorCategory::Other;
    std::size_t count = 1;
    std::size_t first_line = 0;
};

struct LogAnalyzerConfig {
    std::vector<std::string> error_patterns = default_error_patterns();
    bool case_sensitive = false;

    static std::vector<std::string> default_error_patterns();
};

/// Masks volatile fragments so that the same failure in a different file or at a
/// different line compares equal. Idempotent.
std::string normalize_error(std::string_view text);

ErrorSignature make_signature(std::string_view raw_line);

/// Lines matching any configured pattern, grouped by normalized form and ordered by
/// frequency (descending) then first occurrence. The head is the top error.
std::vector<ErrorSignature> analyze_log(std::string_view log, const LogAnalyzerConfig& config = {});

/// Jaccard index over token bigrams of the normalized texts (unigrams for one-token texts).
double signature_similarity(const ErrorSignature& a, const ErrorSignature& b);

/// Throws Error(InvalidArgument) unless 0 < threshold <= 1.
bool similar(const ErrorSignature& a, const ErrorSignature& b, double threshold = 0.8);

}  // namespace repairenv
