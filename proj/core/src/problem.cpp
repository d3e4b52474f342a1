#include "repairenv/problem.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

#include "repairenv/error.hpp"

namespace repairenv {

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Unassigned: return "";
    }
    return "";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "validation" || s == "val") return Split::Validation;
    if (s == "test") return Split::Test;
    if (s.empty()) return Split::Unassigned;
    throw Error(Errc::InvalidArgument, "unknown split " + std::string(s));
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
    std::vector<Problem> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Problem p;
            p.id = j.at("id").get<std::string>();
            p.fixture_id = j.at("fixture_id").get<std::string>();
            p.error_text = j.at("error_text").get<std::string>();
            p.candidate_fix = j.value("candidate_fix", std::string());
            p.created_at = j.value("created_at", std::string());
            p.split = split_from_string(j.value("split", std::string()));
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_problems(const std::filesystem::path& path, const std::vector<Problem>& problems) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    for (const auto& p : problems) {
        nlohmann::ordered_json j;
        j["id"] = p.id;
        j["fixture_id"] = p.fixture_id;
        j["error_text"] = p.error_text;
        j["candidate_fix"] = p.candidate_fix;
        j["created_at"] = p.created_at;
        j["split"] = std::string(to_string(p.split));
        out << j.dump() << "\n";
    }
}

}  // namespace repairenv
