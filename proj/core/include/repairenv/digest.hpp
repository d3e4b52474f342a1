#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace repairenv {

struct FileEntry {
    std::string bytes;
    bool executable = false;

    friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

/// In-memory file tree keyed by generic relative path ("src/Main.java").
using FileTree = std::map<std::string, FileEntry>;

/// Lowercase hex SHA-256 over the sorted (relative path, bytes) pairs of a tree.
/// The executable bit is not part of the digest.
struct TreeDigest {
    std::string hex;

    friend bool operator==(const TreeDigest&, const TreeDigest&) = default;
    friend auto operator<=>(const TreeDigest&, const TreeDigest&) = default;
};

TreeDigest digest_tree(const FileTree& tree);
TreeDigest digest_directory(const std::filesystem::path& root);

std::string sha256_hex(std::string_view bytes);

/// Reads every regular file below `root`. Top-level entries named in `exclude` are skipped.
FileTree read_tree(const std::filesystem::path& root, const std::set<std::string>& exclude = {});

/// Writes `tree` below `root`, creating directories as needed. Existing files are overwritten.
void write_tree(const std::filesystem::path& root, const FileTree& tree);

/// Removes everything inside `root` but keeps the directory itself.
void clear_directory(const std::filesystem::path& root);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace repairenv
