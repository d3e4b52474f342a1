#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repairenv/fixtures.hpp"
#include "repairenv/tool_protocol.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// mkdtemp directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "repairenv-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
};

/// Sample fixtures checked into the repository.
fs::path repo_fixture_dir();

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// Writes <root>/<id>/ with the given files and a fixture.json built from `manifest`
/// (id, build_command "bash build.sh" and auto_upgrade_disabled are filled in when absent).
fs::path write_fixture(const fs::path& root, const std::string& id, const std::map<std::string, std::string>& files,
                       nlohmann::json manifest = nlohmann::json::object());

/// A build that appends "S <ns>" and "E <ns>" lines to `probe` around a sleep.
std::string probed_sleep_build(const fs::path& probe, double sleep_s, int exit_code = 0);

/// Largest number of overlapping [S, E] intervals recorded in a probe file.
std::size_t max_overlap_from_probe(const fs::path& probe);

/// "<tool_call>{...}</tool_call>" for a call with string arguments.
std::string call(const std::string& name, const std::map<std::string, std::string>& args = {});

/// A registry over a scratch directory.
struct Harness {
    TempDir dir;
    repairenv::FixtureRegistry registry;

    Harness();
    /// Registers a sample fixture from the repository.
    std::shared_ptr<const repairenv::RepoFixture> add_repo_fixture(const std::string& id);
    std::shared_ptr<const repairenv::RepoFixture> add(const fs::path& fixture_dir);
    [[nodiscard]] fs::path scratch() const { return dir.path() / "scratch"; }
};

/// Files under `root` read straight from disk, skipping nothing; used as an oracle next to
/// the library's own tree reader.
std::map<std::string, std::string> disk_files(const fs::path& root);

/// Runs `command` through /bin/sh in `cwd`; returns the exit status.
int shell(const std::string& command, const fs::path& cwd);

/// Applies unified diff text in `dir` with `git apply` (outside any repository).
/// Returns git's exit status.
int git_apply(const fs::path& dir, const std::string& patch_text);

/// sha256sum of a file, via the coreutils binary.
std::string sha256sum_file(const fs::path& file);

/// Test-only re-implementation of the error category keyword table: the name of the first
/// category whose keyword occurs in the lowercased text, else "Other".
std::string oracle_category(const std::string& text);

/// Random assistant text built from tag fragments, call bodies (valid and broken), prose and
/// whitespace. Anything goes; parse_assistant must cope.
std::string random_raw_assistant(std::mt19937_64& rng);

/// A message assembled from known parts, with its raw text rendered independently of the
/// library serializer. Prose contains no tags.
struct KnownMessage {
    std::optional<std::string> thinking;
    std::string visible;  // expected visible text
    std::vector<std::pair<std::string, nlohmann::ordered_json>> calls;
    std::string raw;
};
KnownMessage random_known_message(std::mt19937_64& rng);

/// Random string over an alphabet that stresses escaping (quotes, backslashes, tags, UTF-8).
std::string random_string(std::mt19937_64& rng, std::size_t max_len);

/// Small random source tree of text files.
repairenv::FileTree random_tree(std::mt19937_64& rng);

/// Random edit of `tree`: line edits, insertions, deletions, new and removed files, and
/// trailing-newline changes.
repairenv::FileTree random_edit(const repairenv::FileTree& tree, std::mt19937_64& rng);

/// Categorizer input: random words mixed with category keywords in random case.
std::string random_error_text(std::mt19937_64& rng);

}  // namespace testsupport
