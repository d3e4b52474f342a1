#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "repairenv/digest.hpp"
#include "repairenv/unified_diff.hpp"

namespace repairenv {

class BuildGate;

inline constexpr std::string_view kFixtureManifestFile = "fixture.json";
inline constexpr std::string_view kVersionRegistryFile = "registry.json";

struct ErrorSpec {
    std::string error_text;
    std::string category_hint;
    std::vector<std::string> files;
    std::string candidate_fix;
};

struct FixtureManifest {
    std::string build_command;
    std::optional<double> initial_build_time_s;
    std::map<std::string, std::string> pinned_dependencies;
    bool auto_upgrade_disabled = true;
    /// Version written to the gradle-version marker by upgrade_gradle.
    std::string current_gradle_version;
    /// Extra files the judge treats as validation code.
    std::vector<std::string> validation_scripts;
};

/// Local stand-in for a package registry: name -> versions, oldest first.
struct VersionRegistry {
    std::map<std::string, std::vector<std::string>> versions;

    [[nodiscard]] std::optional<std::string> latest(const std::string& name) const;
};

struct RepoFixture {
    std::string id;
    std::filesystem::path source_dir;
    FixtureManifest manifest;
    std::vector<ErrorSpec> injected_errors;
    VersionRegistry registry;

    FileTree source_tree;
    TreeDigest source_digest;
    /// source_tree after dependency pinning and auto-upgrade flags; every workspace starts here.
    FileTree pinned_tree;
    TreeDigest pinned_digest;
};

struct Snapshot {
    std::string label;
    TreeDigest tree_digest;
    std::chrono::system_clock::time_point created_at;
    std::filesystem::path storage;
};

/// An isolated per-rollout copy of a fixture. Owns its directory: the destructor removes it
/// unless keep() was requested. Move-only; never shared between threads concurrently.
class Workspace {
public:
    Workspace(std::string rollout_id, std::filesystem::path base_dir,
              std::shared_ptr<const RepoFixture> fixture);
    Workspace(Workspace&& other) noexcept;
    Workspace& operator=(Workspace&& other) noexcept;
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;
    ~Workspace();

    [[nodiscard]] const std::string& rollout_id() const noexcept { return rollout_id_; }
    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }
    [[nodiscard]] const std::string& fixture_id() const noexcept { return fixture_->id; }
    [[nodiscard]] const RepoFixture& fixture() const noexcept { return *fixture_; }
    [[nodiscard]] const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }
    [[nodiscard]] bool live() const noexcept { return !base_dir_.empty(); }

    [[nodiscard]] FileTree tree() const;
    [[nodiscard]] TreeDigest digest() const;

    void keep(bool value = true) noexcept { keep_ = value; }
    /// Deletes the workspace directory now.
    void release();

private:
    friend Snapshot snapshot(Workspace& ws, const std::string& label);
    friend void restore(Workspace& ws, const std::string& label);

    std::string rollout_id_;
    std::filesystem::path base_dir_;
    std::filesystem::path root_;
    std::shared_ptr<const RepoFixture> fixture_;
    std::vector<Snapshot> snapshots_;
    bool keep_ = false;
};

/// Full-tree copy of the workspace. Re-using a label shadows the earlier snapshot.
Snapshot snapshot(Workspace& ws, const std::string& label);

/// Makes the workspace tree equal to the snapshot. Throws Error(UnknownSnapshot).
void restore(Workspace& ws, const std::string& label);

/// Diff of the workspace against the fixture's pinned pristine tree.
Patch extract_patch(const Workspace& ws);

struct RegistrationOptions {
    /// Reject fixtures whose manifest does not disable auto-upgrades or misses a pin.
    bool require_pinning = true;
};

/// Loaded fixtures plus the directories where pristine copies are cached and workspaces live.
/// Concurrent readers; registration is exclusive.
class FixtureRegistry {
public:
    FixtureRegistry(std::filesystem::path work_root, std::filesystem::path cache_root);

    std::shared_ptr<const RepoFixture> register_fixture(const std::filesystem::path& dir,
                                                        const RegistrationOptions& options = {});
    /// Registers every immediate subdirectory of `root` that contains a fixture.json.
    std::vector<std::string> register_all(const std::filesystem::path& root,
                                          const RegistrationOptions& options = {});

    [[nodiscard]] std::shared_ptr<const RepoFixture> get(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> ids() const;

    /// Re-hashes the fixture's source directory on disk and compares with the registered digest.
    [[nodiscard]] bool verify(const std::string& id) const;

    Workspace materialize_workspace(const std::string& fixture_id, const std::string& rollout_id);

    /// Cached pristine (pinned) tree shared by all workspaces of a fixture.
    [[nodiscard]] std::filesystem::path pristine_path(const std::string& fixture_id) const;

    /// Runs the build command once on a fresh workspace and caches the wall-clock duration.
    /// A failing build still reports its duration.
    double measure_initial_build_time(const std::string& fixture_id, BuildGate* gate = nullptr);
    [[nodiscard]] std::optional<double> initial_build_time(const std::string& fixture_id) const;
    void set_initial_build_time(const std::string& fixture_id, double seconds);

    [[nodiscard]] std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
    [[nodiscard]] const std::filesystem::path& work_root() const noexcept { return work_root_; }

private:
    std::filesystem::path work_root_;
    std::filesystem::path cache_root_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<const RepoFixture>> fixtures_;
    std::map<std::string, double> build_times_;
    std::set<std::string> rollout_ids_;
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> measure_counter_{0};
};

/// Parses fixture.json. Exposed for tooling and tests.
RepoFixture load_fixture(const std::filesystem::path& dir, const RegistrationOptions& options = {});

}  // namespace repairenv
