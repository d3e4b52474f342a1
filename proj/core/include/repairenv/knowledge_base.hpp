#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace repairenv {

struct KnowledgeEntry {
    std::string id;
    std::string error_pattern;
    std::string fix_text;
    std::size_t success_count = 0;
};

struct RankedEntry {
    const KnowledgeEntry* entry = nullptr;
    double relevance = 0.0;
};

/// Historical fixes, loaded from JSON lines `{id, error_pattern, fix_text, success_count}`.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    /// Throws Error(InvalidArgument) on duplicate ids.
    explicit KnowledgeBase(std::vector<KnowledgeEntry> entries);

    static KnowledgeBase load_jsonl(const std::filesystem::path& path);

    [[nodiscard]] const std::vector<KnowledgeEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

private:
    std::vector<KnowledgeEntry> entries_;
};

/// Case-insensitive Jaccard overlap of the alphanumeric token sets.
double relevance_score(std::string_view query, std::string_view error_pattern);

/// Top `k` entries by relevance, then success_count (both descending), then id ascending.
/// Throws Error(EmptyKnowledgeBase) or Error(InvalidArgument) when k == 0.
std::vector<RankedEntry> kb_lookup(const KnowledgeBase& kb, std::string_view query, std::size_t k);

}  // namespace repairenv
