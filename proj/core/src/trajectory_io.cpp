#include "repairenv/trajectory_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "repairenv/error.hpp"

namespace repairenv {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json counts_to_json(const std::map<std::string, std::size_t>& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

std::map<std::string, std::size_t> counts_from_json(const ordered_json& j) {
    std::map<std::string, std::size_t> m;
    for (const auto& [k, v] : j.items()) m[k] = v.get<std::size_t>();
    return m;
}

}  // namespace

ordered_json turn_to_json(const Turn& turn, const TrajectoryWriteOptions& options) {
    ordered_json j;
    j["role"] = std::string(to_string(turn.role));
    j["raw"] = turn.raw;
    j["tool_calls"] = ordered_json::array();
    for (const auto& c : turn.tool_calls) j["tool_calls"].push_back({{"name", c.name}, {"arguments", c.arguments}});
    if (turn.tool_result) {
        j["tool_result"] = {{"tool_name", turn.tool_result->tool_name},
                            {"status", std::string(to_string(turn.tool_result->status))},
                            {"content", turn.tool_result->content}};
    } else {
        j["tool_result"] = nullptr;
    }
    j["tokens"] = {{"thinking", turn.tokens.thinking},
                   {"content", turn.tokens.content},
                   {"tool_call_emission", counts_to_json(turn.tokens.tool_call_emission)},
                   {"tool_response", counts_to_json(turn.tokens.tool_response)}};
    if (turn.build) {
        ordered_json b;
        b["status"] = std::string(to_string(turn.build->status));
        if (options.include_timing) b["duration_s"] = turn.build->duration_s;
        j["build"] = b;
    } else {
        j["build"] = nullptr;
    }
    return j;
}

ordered_json summary_to_json(const Trajectory& t, const TrajectoryWriteOptions& options) {
    ordered_json j;
    j["type"] = "summary";
    j["problem_id"] = t.problem_id;
    j["terminal_reason"] = std::string(to_string(t.terminal_reason));
    j["reward"] = t.reward;
    if (options.include_timing) j["wall_time_s"] = t.wall_time_s;
    j["tool_call_count"] = t.tool_call_count;
    if (t.final_patch) {
        j["final_patch"] = {{"base_digest", t.final_patch->base_digest.hex}, {"diff", t.final_patch->to_unified()}};
    } else {
        j["final_patch"] = nullptr;
    }
    return j;
}

std::string trajectory_to_jsonl(const Trajectory& trajectory, const TrajectoryWriteOptions& options) {
    std::string out;
    for (const auto& turn : trajectory.turns) out += turn_to_json(turn, options).dump() + "\n";
    out += summary_to_json(trajectory, options).dump() + "\n";
    return out;
}

void write_trajectory(const fs::path& path, const Trajectory& trajectory, const TrajectoryWriteOptions& options) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << trajectory_to_jsonl(trajectory, options);
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

std::vector<Trajectory> parse_trajectories(std::istream& in) {
    std::vector<Trajectory> out;
    Trajectory current;
    bool open = false;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = ordered_json::parse(line);
            if (j.value("type", "") == "summary") {
                current.problem_id = j.at("problem_id").get<std::string>();
                current.terminal_reason = terminal_reason_from_string(j.at("terminal_reason").get<std::string>());
                current.reward = j.at("reward").get<int>();
                current.wall_time_s = j.value("wall_time_s", 0.0);
                current.tool_call_count = j.at("tool_call_count").get<std::size_t>();
                if (j.contains("final_patch") && !j.at("final_patch").is_null()) {
                    auto patch = parse_patch(j.at("final_patch").at("diff").get<std::string>());
                    patch.base_digest.hex = j.at("final_patch").at("base_digest").get<std::string>();
                    current.final_patch = std::move(patch);
                }
                out.push_back(std::move(current));
                current = Trajectory{};
                open = false;
                continue;
            }
            Turn turn;
            turn.role = role_from_string(j.at("role").get<std::string>());
            turn.raw = j.at("raw").get<std::string>();
            if (turn.role == Role::Assistant) turn.tool_calls = parse_assistant(turn.raw).tool_calls;
            if (const auto& r = j.at("tool_result"); !r.is_null()) {
                turn.tool_result = ToolResult{r.at("tool_name").get<std::string>(),
                                              tool_status_from_string(r.at("status").get<std::string>()),
                                              r.at("content").get<std::string>()};
            }
            const auto& tk = j.at("tokens");
            turn.tokens.thinking = tk.at("thinking").get<std::size_t>();
            turn.tokens.content = tk.at("content").get<std::size_t>();
            turn.tokens.tool_call_emission = counts_from_json(tk.at("tool_call_emission"));
            turn.tokens.tool_response = counts_from_json(tk.at("tool_response"));
            if (j.contains("build") && !j.at("build").is_null()) {
                const auto& b = j.at("build");
                turn.build = BuildRecord{build_status_from_string(b.at("status").get<std::string>()),
                                         b.value("duration_s", 0.0)};
            }
            current.turns.push_back(std::move(turn));
            open = true;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidArgument, "trajectory line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (open) throw Error(Errc::InvalidArgument, "trajectory log ends without a summary record");
    return out;
}

std::vector<Trajectory> read_trajectories(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    return parse_trajectories(in);
}

std::vector<Trajectory> read_trajectory_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::NotFound, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Trajectory> out;
    for (const auto& f : files) {
        auto part = read_trajectories(f);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (out.empty()) throw Error(Errc::NotFound, "no trajectories under " + dir.string());
    return out;
}

}  // namespace repairenv
