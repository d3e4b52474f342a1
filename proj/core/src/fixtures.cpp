#include "repairenv/fixtures.hpp"

#include <nlohmann/json.hpp>

#include <mutex>

#include "repairenv/build_gate.hpp"
#include "repairenv/dependency_spec.hpp"
#include "repairenv/error.hpp"
#include "repairenv/process.hpp"

namespace repairenv {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::string> VersionRegistry::latest(const std::string& name) const {
    auto it = versions.find(name);
    if (it == versions.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
}

namespace {

VersionRegistry load_registry(const fs::path& fixture_dir) {
    VersionRegistry reg;
    for (const auto& candidate : {fixture_dir / kVersionRegistryFile, fixture_dir.parent_path() / kVersionRegistryFile}) {
        std::error_code ec;
        if (!fs::is_regular_file(candidate, ec)) continue;
        try {
            auto doc = json::parse(read_file_bytes(candidate));
            for (const auto& [name, list] : doc.items())
                reg.versions[name] = list.get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw Error(Errc::InvalidFixture, candidate.string() + ": " + e.what());
        }
        break;
    }
    return reg;
}

FileTree pin_tree(const RepoFixture& fx) {
    FileTree pinned = fx.source_tree;
    auto spec_it = pinned.find(std::string(kDependencySpecFile));
    if (spec_it != pinned.end()) {
        auto spec = DependencySpec::parse(spec_it->second.bytes);
        for (const auto& dep : std::vector<Dependency>(spec.dependencies())) {
            if (!DependencySpec::is_wildcard(dep.version)) continue;
            auto pin = fx.manifest.pinned_dependencies.find(dep.name);
            if (pin != fx.manifest.pinned_dependencies.end()) spec.set_version(dep.name, pin->second);
        }
        spec_it->second.bytes = spec.serialize();
    }
    if (fx.manifest.auto_upgrade_disabled)
        pinned[std::string(kAutoUpgradeFlagFile)] = FileEntry{"disabled\n", false};
    return pinned;
}

std::string workspace_dir_name(const std::string& rollout_id) {
    std::string safe;
    for (char c : rollout_id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        safe.push_back(ok ? c : '_');
    }
    if (safe.size() > 64) safe.resize(64);
    return safe + "-" + sha256_hex(rollout_id).substr(0, 12);
}

void copy_tree(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::create_directories(to, ec);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(Errc::IoFailure, "copy " + from.string() + " -> " + to.string() + ": " + ec.message());
}

}  // namespace

RepoFixture load_fixture(const fs::path& dir, const RegistrationOptions& options) {
    const auto manifest_path = dir / kFixtureManifestFile;
    std::error_code ec;
    if (!fs::is_regular_file(manifest_path, ec))
        throw Error(Errc::UnknownFixture, "no fixture.json in " + dir.string());

    RepoFixture fx;
    fx.source_dir = fs::absolute(dir);
    try {
        auto doc = json::parse(read_file_bytes(manifest_path));
        fx.id = doc.at("id").get<std::string>();
        fx.manifest.build_command = doc.at("build_command").get<std::string>();
        if (doc.contains("initial_build_time_s") && doc["initial_build_time_s"].is_number())
            fx.manifest.initial_build_time_s = doc["initial_build_time_s"].get<double>();
        if (doc.contains("pinned_dependencies"))
            fx.manifest.pinned_dependencies = doc["pinned_dependencies"].get<std::map<std::string, std::string>>();
        fx.manifest.auto_upgrade_disabled = doc.value("auto_upgrade_disabled", false);
        fx.manifest.current_gradle_version = doc.value("current_gradle_version", std::string());
        if (doc.contains("validation_scripts"))
            fx.manifest.validation_scripts = doc["validation_scripts"].get<std::vector<std::string>>();
        for (const auto& e : doc.value("injected_errors", json::array())) {
            ErrorSpec spec;
            spec.error_text = e.at("error_text").get<std::string>();
            spec.category_hint = e.value("category_hint", std::string());
            spec.files = e.value("files", std::vector<std::string>{});
            spec.candidate_fix = e.value("candidate_fix", std::string());
            fx.injected_errors.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidFixture, manifest_path.string() + ": " + e.what());
    }
    if (fx.id.empty()) throw Error(Errc::InvalidFixture, manifest_path.string() + ": empty id");

    fx.registry = load_registry(fx.source_dir);
    fx.source_tree = read_tree(fx.source_dir, {std::string(kFixtureManifestFile), std::string(kVersionRegistryFile)});
    fx.source_digest = digest_tree(fx.source_tree);

    std::optional<DependencySpec> deps;
    if (auto it = fx.source_tree.find(std::string(kDependencySpecFile)); it != fx.source_tree.end())
        deps = DependencySpec::parse(it->second.bytes);

    for (const auto& err : fx.injected_errors) {
        bool anchored = false;
        for (const auto& f : err.files)
            anchored = anchored || fx.source_tree.contains(f) || (deps && deps->contains(f));
        if (!anchored)
            throw Error(Errc::InvalidFixture,
                        fx.id + ": injected error names no file or dependency of the fixture");
    }

    if (options.require_pinning) {
        if (!fx.manifest.auto_upgrade_disabled)
            throw Error(Errc::InvalidFixture, fx.id + ": auto_upgrade_disabled must be true");
        if (deps) {
            for (const auto& d : deps->dependencies())
                if (!fx.manifest.pinned_dependencies.contains(d.name))
                    throw Error(Errc::InvalidFixture, fx.id + ": dependency " + d.name + " is not pinned");
        }
    }

    fx.pinned_tree = pin_tree(fx);
    fx.pinned_digest = digest_tree(fx.pinned_tree);
    return fx;
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(std::string rollout_id, fs::path base_dir, std::shared_ptr<const RepoFixture> fixture)
    : rollout_id_(std::move(rollout_id)),
      base_dir_(std::move(base_dir)),
      root_(base_dir_ / "tree"),
      fixture_(std::move(fixture)) {}

Workspace::Workspace(Workspace&& other) noexcept
    : rollout_id_(std::move(other.rollout_id_)),
      base_dir_(std::exchange(other.base_dir_, {})),
      root_(std::move(other.root_)),
      fixture_(std::move(other.fixture_)),
      snapshots_(std::move(other.snapshots_)),
      keep_(other.keep_) {}

Workspace& Workspace::operator=(Workspace&& other) noexcept {
    if (this != &other) {
        try {
            release();
        } catch (...) {
        }
        rollout_id_ = std::move(other.rollout_id_);
        base_dir_ = std::exchange(other.base_dir_, {});
        root_ = std::move(other.root_);
        fixture_ = std::move(other.fixture_);
        snapshots_ = std::move(other.snapshots_);
        keep_ = other.keep_;
    }
    return *this;
}

Workspace::~Workspace() {
    if (keep_) return;
    std::error_code ec;
    if (!base_dir_.empty()) fs::remove_all(base_dir_, ec);
}

void Workspace::release() {
    if (base_dir_.empty()) return;
    std::error_code ec;
    fs::remove_all(base_dir_, ec);
    base_dir_.clear();
    if (ec) throw Error(Errc::IoFailure, "cannot remove workspace " + rollout_id_);
}

FileTree Workspace::tree() const { return read_tree(root_); }

TreeDigest Workspace::digest() const { return digest_tree(tree()); }

Snapshot snapshot(Workspace& ws, const std::string& label) {
    if (!ws.live()) throw Error(Errc::IoFailure, "workspace released");
    Snapshot snap;
    snap.label = label;
    snap.created_at = std::chrono::system_clock::now();
    snap.storage = ws.base_dir_ / "snapshots" / std::to_string(ws.snapshots_.size());
    std::error_code ec;
    fs::remove_all(snap.storage, ec);
    copy_tree(ws.root_, snap.storage);
    snap.tree_digest = digest_directory(snap.storage);
    ws.snapshots_.push_back(snap);
    return snap;
}

void restore(Workspace& ws, const std::string& label) {
    auto it = std::find_if(ws.snapshots_.rbegin(), ws.snapshots_.rend(),
                           [&](const Snapshot& s) { return s.label == label; });
    if (it == ws.snapshots_.rend()) throw Error(Errc::UnknownSnapshot, label);
    clear_directory(ws.root_);
    copy_tree(it->storage, ws.root_);
}

Patch extract_patch(const Workspace& ws) {
    return diff_trees(ws.fixture().pinned_tree, ws.tree());
}

// ---------------------------------------------------------------------------
// FixtureRegistry

FixtureRegistry::FixtureRegistry(fs::path work_root, fs::path cache_root)
    : work_root_(fs::absolute(work_root)), cache_root_(fs::absolute(cache_root)) {
    std::error_code ec;
    fs::create_directories(work_root_, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + work_root_.string());
    fs::create_directories(cache_root_, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + cache_root_.string());
}

std::shared_ptr<const RepoFixture> FixtureRegistry::register_fixture(const fs::path& dir,
                                                                     const RegistrationOptions& options) {
    auto fx = std::make_shared<const RepoFixture>(load_fixture(dir, options));

    // Content-addressed pristine copy; written once, renamed into place.
    const auto target = cache_root_ / fx->pinned_digest.hex;
    std::error_code ec;
    if (!fs::exists(target, ec)) {
        const auto staging = cache_root_ / (fx->pinned_digest.hex + ".tmp-" + sha256_hex(fx->id).substr(0, 8));
        fs::remove_all(staging, ec);
        write_tree(staging, fx->pinned_tree);
        fs::rename(staging, target, ec);
        if (ec) fs::remove_all(staging, ec);
    }

    std::unique_lock lock(mu_);
    fixtures_[fx->id] = fx;
    if (fx->manifest.initial_build_time_s) build_times_[fx->id] = *fx->manifest.initial_build_time_s;
    return fx;
}

std::vector<std::string> FixtureRegistry::register_all(const fs::path& root, const RegistrationOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(Errc::IoFailure, "not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root, ec))
        if (entry.is_directory() && fs::exists(entry.path() / kFixtureManifestFile)) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<std::string> ids;
    for (const auto& d : dirs) ids.push_back(register_fixture(d, options)->id);
    return ids;
}

std::shared_ptr<const RepoFixture> FixtureRegistry::get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = fixtures_.find(id);
    if (it == fixtures_.end()) throw Error(Errc::UnknownFixture, id);
    return it->second;
}

std::vector<std::string> FixtureRegistry::ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : fixtures_) out.push_back(id);
    return out;
}

bool FixtureRegistry::verify(const std::string& id) const {
    auto fx = get(id);
    auto tree = read_tree(fx->source_dir, {std::string(kFixtureManifestFile), std::string(kVersionRegistryFile)});
    return digest_tree(tree) == fx->source_digest;
}

fs::path FixtureRegistry::pristine_path(const std::string& fixture_id) const {
    return cache_root_ / get(fixture_id)->pinned_digest.hex;
}

Workspace FixtureRegistry::materialize_workspace(const std::string& fixture_id, const std::string& rollout_id) {
    auto fx = get(fixture_id);
    const auto base = work_root_ / workspace_dir_name(rollout_id);
    {
        std::unique_lock lock(mu_);
        std::error_code ec;
        if (rollout_ids_.contains(rollout_id) || fs::exists(base, ec))
            throw Error(Errc::RolloutIdCollision, rollout_id);
        rollout_ids_.insert(rollout_id);
    }
    Workspace ws(rollout_id, base, fx);
    const auto pristine = cache_root_ / fx->pinned_digest.hex;
    std::error_code ec;
    if (fs::is_directory(pristine, ec)) {
        copy_tree(pristine, ws.root());
        cache_hits_.fetch_add(1);
    } else {
        write_tree(ws.root(), fx->pinned_tree);
    }
    return ws;
}

double FixtureRegistry::measure_initial_build_time(const std::string& fixture_id, BuildGate* gate) {
    auto fx = get(fixture_id);
    auto ws = materialize_workspace(
        fixture_id, "measure-" + fixture_id + "-" + std::to_string(measure_counter_.fetch_add(1)));
    CommandOptions opts;
    opts.cwd = ws.root();
    opts.timeout = Seconds(24 * 3600);
    std::optional<BuildGate::Permit> permit;
    if (gate != nullptr) permit.emplace(gate->acquire());
    const auto result = run_command(fx->manifest.build_command, opts);
    permit.reset();
    const double seconds = result.duration.count();
    set_initial_build_time(fixture_id, seconds);
    return seconds;
}

std::optional<double> FixtureRegistry::initial_build_time(const std::string& fixture_id) const {
    std::shared_lock lock(mu_);
    auto it = build_times_.find(fixture_id);
    if (it == build_times_.end()) return std::nullopt;
    return it->second;
}

void FixtureRegistry::set_initial_build_time(const std::string& fixture_id, double seconds) {
    std::unique_lock lock(mu_);
    build_times_[fixture_id] = seconds;
}

}  // namespace repairenv
