#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace repairenv {

enum class Split { Train, Validation, Test, Unassigned };

std::string_view to_string(Split s) noexcept;
Split split_from_string(std::string_view s);

/// One <repository, error, candidate fix> unit of work.
struct Problem {
    std::string id;
    std::string fixture_id;
    std::string error_text;
    std::string candidate_fix;
    Split split = Split::Unassigned;
    std::string created_at;  // ISO-8601; orders the time-based split

    friend bool operator==(const Problem&, const Problem&) = default;
};

/// JSON lines `{id, fixture_id, error_text, candidate_fix, created_at, split}`.
std::vector<Problem> load_problems(const std::filesystem::path& path);
void save_problems(const std::filesystem::path& path, const std::vector<Problem>& problems);

}  // namespace repairenv
