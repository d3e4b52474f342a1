#include "repairenv/knowledge_base.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "repairenv/error.hpp"

namespace repairenv {

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> ids;
    for (const auto& e : entries_)
        if (!ids.insert(e.id).second) throw Error(Errc::InvalidArgument, "duplicate knowledge-base id " + e.id);
}

KnowledgeBase KnowledgeBase::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
    std::vector<KnowledgeEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            KnowledgeEntry e;
            e.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            e.error_pattern = j.at("error_pattern").get<std::string>();
            e.fix_text = j.at("fix_text").get<std::string>();
            e.success_count = j.value("success_count", std::size_t{0});
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(Errc::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return KnowledgeBase(std::move(entries));
}

namespace {

std::set<std::string> token_set(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.insert(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

}  // namespace

double relevance_score(std::string_view query, std::string_view error_pattern) {
    const auto a = token_set(query);
    const auto b = token_set(error_pattern);
    if (a.empty() && b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : a) common += b.count(t);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::vector<RankedEntry> kb_lookup(const KnowledgeBase& kb, std::string_view query, std::size_t k) {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
    if (kb.empty()) throw Error(Errc::EmptyKnowledgeBase, "no entries");
    std::vector<RankedEntry> ranked;
    ranked.reserve(kb.entries().size());
    for (const auto& e : kb.entries()) ranked.push_back({&e, relevance_score(query, e.error_pattern)});
    std::sort(ranked.begin(), ranked.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        if (a.entry->success_count != b.entry->success_count) return a.entry->success_count > b.entry->success_count;
        return a.entry->id < b.entry->id;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

}  // namespace repairenv
