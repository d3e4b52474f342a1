#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repairenv/digest.hpp"

namespace repairenv {

/// One file's section of a git-style unified diff.
struct FilePatch {
    std::string path;
    std::string diff;

    friend bool operator==(const FilePatch&, const FilePatch&) = default;
};

struct Patch {
    std::vector<FilePatch> hunks;
    TreeDigest base_digest;

    [[nodiscard]] bool empty() const noexcept { return hunks.empty(); }
    [[nodiscard]] std::string to_unified() const;
};

/// Diff of a single file. `before`/`after` absent means the file does not exist on that side.
/// Returns an empty string when both sides are byte-identical.
std::string diff_file(const std::string& path, const std::optional<FileEntry>& before,
                      const std::optional<FileEntry>& after, int context = 3);

/// Diff of two trees; one FilePatch per path whose bytes differ, in path order.
Patch diff_trees(const FileTree& before, const FileTree& after, int context = 3);

/// Splits concatenated unified diff text back into per-file sections.
Patch parse_patch(std::string_view text);

/// Applies `patch` to `base`. Context and removed lines must match exactly; otherwise
/// throws Error(PatchConflict).
FileTree apply_patch(const FileTree& base, const Patch& patch);

}  // namespace repairenv
