#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repairenv/episode.hpp"

namespace repairenv {

struct TrajectoryWriteOptions {
    /// Wall time and build durations. Off gives byte-identical logs for identical runs.
    bool include_timing = true;
};

nlohmann::ordered_json turn_to_json(const Turn& turn, const TrajectoryWriteOptions& options = {});
nlohmann::ordered_json summary_to_json(const Trajectory& trajectory, const TrajectoryWriteOptions& options = {});

/// One JSON object per turn, then a summary record carrying "type": "summary".
std::string trajectory_to_jsonl(const Trajectory& trajectory, const TrajectoryWriteOptions& options = {});
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory,
                      const TrajectoryWriteOptions& options = {});

/// Parses every trajectory in a JSON-lines stream; a summary record closes each one.
/// Throws Error(InvalidArgument) on malformed records and on turns without a summary.
std::vector<Trajectory> parse_trajectories(std::istream& in);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);
/// Every *.jsonl file under dir, in path order. Throws Error(NotFound) when there are none.
std::vector<Trajectory> read_trajectory_dir(const std::filesystem::path& dir);

}  // namespace repairenv
