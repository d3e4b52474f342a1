#include "repairenv/log_analyzer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "repairenv/error.hpp"

namespace repairenv {

std::vector<std::string> LogAnalyzerConfig::default_error_patterns() {
    return {"error",     "failed",       "failure",    "exception",  "missing",     "not found",
            "could not", "cannot",       "deprecated", "incompatible", "unresolved", "not supported"};
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokens_of(std::string_view normalized) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : lower(normalized)) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '<' || c == '>') {
            cur.push_back(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::set<std::string> shingles(const std::vector<std::string>& tokens) {
    std::set<std::string> out;
    if (tokens.size() < 2) {
        out.insert(tokens.begin(), tokens.end());
        return out;
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.insert(tokens[i] + " " + tokens[i + 1]);
    return out;
}

}  // namespace

std::string normalize_error(std::string_view text) {
    static const std::regex path(R"((?:[A-Za-z]:)?(?:[\w.~-]*[/\\])+[\w.-]*)");
    static const std::regex hash(R"(\b(?=[0-9a-fA-F]*[0-9])(?=[0-9a-fA-F]*[a-fA-F])[0-9a-fA-F]{7,}\b)");
    static const std::regex version(R"(\b\d+(?:\.\d+)+(?:[-+][A-Za-z0-9.]+)?\b)");
    static const std::regex number(R"(\d+)");

    std::string s = collapse_whitespace(text);
    s = std::regex_replace(s, path, "<path>");
    s = std::regex_replace(s, hash, "<hash>");
    s = std::regex_replace(s, version, "<ver>");
    s = std::regex_replace(s, number, "<n>");
    return s;
}

ErrorSignature make_signature(std::string_view raw_line) {
    ErrorSignature sig;
    sig.raw = collapse_whitespace(raw_line);
    sig.normalized = normalize_error(raw_line);
    sig.category = categorize_error(raw_line);
    return sig;
}

std::vector<ErrorSignature> analyze_log(std::string_view log, const LogAnalyzerConfig& config) {
    std::vector<std::string> patterns = config.error_patterns;
    if (!config.case_sensitive)
        for (auto& p : patterns) p = lower(p);

    std::vector<ErrorSignature> sigs;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= log.size()) {
        auto nl = log.find('\n', pos);
        auto line = log.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        const std::string haystack = config.case_sensitive ? std::string(line) : lower(line);
        const bool hit = std::any_of(patterns.begin(), patterns.end(),
                                     [&](const std::string& p) { return !p.empty() && haystack.find(p) != std::string::npos; });
        if (hit && !collapse_whitespace(line).empty()) {
            auto sig = make_signature(line);
            sig.first_line = line_no;
            auto [it, inserted] = index.emplace(sig.normalized, sigs.size());
            if (inserted)
                sigs.push_back(std::move(sig));
            else
                ++sigs[it->second].count;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
        ++line_no;
    }
    std::stable_sort(sigs.begin(), sigs.end(), [](const ErrorSignature& a, const ErrorSignature& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.first_line < b.first_line;
    });
    return sigs;
}

double signature_similarity(const ErrorSignature& a, const ErrorSignature& b) {
    const auto sa = shingles(tokens_of(a.normalized));
    const auto sb = shingles(tokens_of(b.normalized));
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& s : sa) common += sb.count(s);
    const std::size_t uni = sa.size() + sb.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

bool similar(const ErrorSignature& a, const ErrorSignature& b, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw Error(Errc::InvalidArgument, "similarity threshold must be in (0, 1]");
    return signature_similarity(a, b) >= threshold;
}

}  // namespace repairenv
