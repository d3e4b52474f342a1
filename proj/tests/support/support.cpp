#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace testsupport {

TempDir::TempDir(const std::string& prefix) {
    std::string tmpl = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
    if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path repo_fixture_dir() { return REPAIRENV_FIXTURE_DIR; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_fixture(const fs::path& root, const std::string& id, const std::map<std::string, std::string>& files,
                       nlohmann::json manifest) {
    const auto dir = root / id;
    fs::create_directories(dir);
    for (const auto& [rel, text] : files) write_text(dir / rel, text);
    if (!manifest.contains("id")) manifest["id"] = id;
    if (!manifest.contains("build_command")) manifest["build_command"] = "bash build.sh";
    if (!manifest.contains("auto_upgrade_disabled")) manifest["auto_upgrade_disabled"] = true;
    write_text(dir / "fixture.json", manifest.dump(2));
    return dir;
}

std::string probed_sleep_build(const fs::path& probe, double sleep_s, int exit_code) {
    std::ostringstream s;
    s << "echo \"S $(date +%s%N)\" >> '" << probe.string() << "'\n"
      << "sleep " << sleep_s << "\n"
      << "echo \"E $(date +%s%N)\" >> '" << probe.string() << "'\n"
      << "exit " << exit_code << "\n";
    return s.str();
}

std::size_t max_overlap_from_probe(const fs::path& probe) {
    std::ifstream in(probe);
    std::vector<std::pair<long long, int>> events;
    std::string tag;
    long long t = 0;
    while (in >> tag >> t) events.emplace_back(t, tag == "S" ? 1 : -1);
    // Ends sort before starts at the same instant so touching intervals do not overlap.
    std::sort(events.begin(), events.end());
    long long level = 0;
    long long best = 0;
    for (const auto& [_, d] : events) {
        level += d;
        best = std::max(best, level);
    }
    return static_cast<std::size_t>(best);
}

std::string call(const std::string& name, const std::map<std::string, std::string>& args) {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["arguments"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : args) j["arguments"][k] = v;
    return "<tool_call>" + j.dump() + "</tool_call>";
}

Harness::Harness()
    : registry(dir.path() / "work", dir.path() / "cache") {
    fs::create_directories(dir.path() / "scratch");
}

std::shared_ptr<const repairenv::RepoFixture> Harness::add_repo_fixture(const std::string& id) {
    return registry.register_fixture(repo_fixture_dir() / id);
}

std::shared_ptr<const repairenv::RepoFixture> Harness::add(const fs::path& fixture_dir) {
    return registry.register_fixture(fixture_dir);
}

std::map<std::string, std::string> disk_files(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
    return out;
}

int shell(const std::string& command, const fs::path& cwd) {
    const std::string full = "cd '" + cwd.string() + "' && " + command;
    const int rc = std::system(full.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int git_apply(const fs::path& dir, const std::string& patch_text) {
    TempDir scratch("repairenv-patch");
    const auto file = scratch.path() / "change.diff";
    write_text(file, patch_text);
    return shell("git apply --whitespace=nowarn '" + file.string() + "' 2>/dev/null", dir);
}

std::string sha256sum_file(const fs::path& file) {
    TempDir scratch("repairenv-sum");
    const auto out = scratch.path() / "sum";
    shell("sha256sum '" + file.string() + "' > '" + out.string() + "'", scratch.path());
    return read_text(out).substr(0, 64);
}

std::string oracle_category(const std::string& text) {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
        {"DependencyRelated", {"dependency", "dependencies"}},
        {"BuildTool", {"gradle", "maven", "build tool", "build failed", "compilation failed"}},
        {"Test", {"test", "unit test", "integration test", "test case", "test failure"}},
        {"Configuration", {"configuration", "config", "schema", "avsc", "yaml", "yml", "json", "xml"}},
        {"Installation", {"install", "yarn", "npm", "pip", "package manager"}},
        {"Version", {"version", "compatibility", "incompatible", "mismatch"}},
        {"Environment", {"path", "environment", "variable", "not found", "cannot locate", "missing"}},
        {"Permission", {"permission", "access", "denied", "forbidden"}},
    };
    std::string lowered;
    for (char ch : text) lowered.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
    for (const auto& [name, words] : table)
        for (const auto& w : words)
            if (lowered.find(w) != std::string::npos) return name;
    return "Other";
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

std::string random_word(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"build", "fix", "gradle", "the", "error", "Reading", "ok", "x",
                                                   "résumé", "数据", "a.b", "--flag", "`code`", "{", "}", "[1]"};
    return words[pick(rng, words.size())];
}

std::string prose(std::mt19937_64& rng) {
    std::string out;
    const auto n = 1 + pick(rng, 6);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += coin(rng, 0.8) ? " " : "\n";
        out += random_word(rng);
    }
    return out;
}

nlohmann::ordered_json random_arguments(std::mt19937_64& rng) {
    static const std::vector<std::string> keys = {"file_path", "cmd", "updated_contents", "dependency_name",
                                                  "pattern", "n", "flag", "note"};
    nlohmann::ordered_json args = nlohmann::ordered_json::object();
    const auto n = pick(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& k = keys[pick(rng, keys.size())];
        switch (pick(rng, 5)) {
        case 0: args[k] = static_cast<std::int64_t>(pick(rng, 100000)) - 50000; break;
        case 1: args[k] = coin(rng); break;
        case 2: args[k] = nullptr; break;
        default: args[k] = random_string(rng, 40); break;
        }
    }
    return args;
}

std::string tool_name(std::mt19937_64& rng) {
    const auto& schemas = repairenv::tool_schemas();
    if (coin(rng, 0.1)) return "custom_tool";
    return std::string(schemas[pick(rng, schemas.size())].name);
}

/// Call body rendered with nlohmann's dump, escaping "</" so no closing tag appears inside.
std::string render_body(const std::string& name, const nlohmann::ordered_json& args, std::mt19937_64& rng) {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["arguments"] = args;
    std::string text = coin(rng) ? j.dump() : j.dump(2);
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        out.push_back(text[i]);
        if (text[i] == '<' && i + 1 < text.size() && text[i + 1] == '/') out.push_back('\\');
    }
    return out;
}

std::string padding(std::mt19937_64& rng) {
    static const std::vector<std::string> pads = {"", " ", "\n", "\n\n", "\t ", " \n "};
    return pads[pick(rng, pads.size())];
}

}  // namespace

std::string random_string(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> alphabet = {"a", "Z", "0", " ", "\n", "\t", "\"", "\\", "/", "<", ">",
                                                      "</", "{", "}", "é", "漢", "</tool_call>", "<think>", "\x01"};
    std::string out;
    const auto n = pick(rng, max_len + 1);
    for (std::size_t i = 0; i < n; ++i) out += alphabet[pick(rng, alphabet.size())];
    return out;
}

std::string random_raw_assistant(std::mt19937_64& rng) {
    std::string out;
    if (coin(rng, 0.3)) out += padding(rng) + "<think>" + prose(rng) + (coin(rng, 0.8) ? "</think>" : "");
    const auto n = pick(rng, 9);
    for (std::size_t i = 0; i < n; ++i) {
        out += padding(rng);
        switch (pick(rng, 9)) {
        case 0:
        case 1: out += prose(rng); break;
        case 2:
        case 3: out += "<tool_call>" + render_body(tool_name(rng), random_arguments(rng), rng) + "</tool_call>"; break;
        case 4: out += "<tool_call>{\"name\": \"read_file\", \"arguments\": {" + prose(rng) + "</tool_call>"; break;
        case 5: out += "<tool_call>" + random_string(rng, 12) + "</tool_call>"; break;
        case 6: {
            static const std::vector<std::string> tags = {"<tool_call>", "</tool_call>", "<think>", "</think>"};
            out += tags[pick(rng, tags.size())];
            break;
        }
        case 7: out += "<tool_call>{\"name\": 3, \"arguments\": {}}</tool_call>"; break;
        default: out += random_string(rng, 20); break;
        }
    }
    return out;
}

KnownMessage random_known_message(std::mt19937_64& rng) {
    KnownMessage m;
    if (coin(rng, 0.4)) {
        m.thinking = prose(rng);
        m.raw += padding(rng) + "<think>" + *m.thinking + "</think>";
    }
    // Prose between two calls forms one visible piece, trimmed at its ends only.
    std::string piece;
    auto flush = [&] {
        const auto b = piece.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) {
            const auto e = piece.find_last_not_of(" \t\r\n");
            if (!m.visible.empty()) m.visible += "\n";
            m.visible += piece.substr(b, e - b + 1);
        }
        piece.clear();
    };
    const auto n = pick(rng, 8);
    for (std::size_t i = 0; i < n; ++i) {
        const auto pad = padding(rng);
        m.raw += pad;
        piece += pad;
        if (coin(rng, 0.6)) {
            flush();
            auto name = tool_name(rng);
            auto args = random_arguments(rng);
            m.raw += "<tool_call>" + render_body(name, args, rng) + "</tool_call>";
            m.calls.emplace_back(std::move(name), std::move(args));
        } else {
            const auto text = prose(rng);
            m.raw += text;
            piece += text;
        }
    }
    const auto tail = padding(rng);
    m.raw += tail;
    piece += tail;
    flush();
    return m;
}

repairenv::FileTree random_tree(std::mt19937_64& rng) {
    repairenv::FileTree tree;
    const auto files = 1 + pick(rng, 4);
    for (std::size_t f = 0; f < files; ++f) {
        std::string body;
        const auto lines = pick(rng, 30);
        for (std::size_t l = 0; l < lines; ++l) body += "line " + std::to_string(pick(rng, 8)) + "\n";
        if (!body.empty() && coin(rng, 0.2)) body.pop_back();
        const std::string path = (coin(rng) ? "src/" : "") + std::string("f") + std::to_string(f) + ".txt";
        tree[path] = repairenv::FileEntry{body, false};
    }
    return tree;
}

repairenv::FileTree random_edit(const repairenv::FileTree& tree, std::mt19937_64& rng) {
    auto out = tree;
    const auto edits = 1 + pick(rng, 5);
    for (std::size_t e = 0; e < edits; ++e) {
        const auto action = pick(rng, 10);
        if (action == 0) {
            out["new/n" + std::to_string(pick(rng, 1000)) + ".txt"] = repairenv::FileEntry{prose(rng) + "\n", false};
            continue;
        }
        if (out.empty()) continue;
        auto it = std::next(out.begin(), static_cast<std::ptrdiff_t>(pick(rng, out.size())));
        if (action == 1 && out.size() > 1) {
            out.erase(it);
            continue;
        }
        auto& body = it->second.bytes;
        std::vector<std::string> lines;
        std::string cur;
        for (char c : body) {
            cur.push_back(c);
            if (c == '\n') lines.push_back(std::move(cur)), cur.clear();
        }
        const bool trailing = !cur.empty();
        if (trailing) lines.push_back(cur);
        if (action == 2) {
            // Toggle the final newline.
            if (!body.empty() && body.back() == '\n') body.pop_back();
            else body.push_back('\n');
            continue;
        }
        const auto at = lines.empty() ? 0 : pick(rng, lines.size() + 1);
        if (action <= 5) {
            lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at), "inserted " + prose(rng) + "\n");
        } else if (action <= 7 && !lines.empty()) {
            lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(std::min(at, lines.size() - 1)));
        } else if (!lines.empty()) {
            auto& l = lines[std::min(at, lines.size() - 1)];
            const bool nl = !l.empty() && l.back() == '\n';
            l = "changed " + std::to_string(pick(rng, 100)) + (nl ? "\n" : "");
        }
        body.clear();
        for (const auto& l : lines) body += l;
    }
    return out;
}

std::string random_error_text(std::mt19937_64& rng) {
    static const std::vector<std::string> keywords = {
        "dependency", "dependencies", "gradle", "maven", "build tool", "build failed", "compilation failed", "test",
        "configuration", "config", "schema", "avsc", "yaml", "yml", "json", "xml", "install", "yarn", "npm", "pip",
        "package manager", "version", "compatibility", "incompatible", "mismatch", "path", "environment", "variable",
        "not found", "cannot locate", "missing", "permission", "access", "denied", "forbidden"};
    static const std::vector<std::string> filler = {"error", "at", "line", "42", "could", "the", "resolve",
                                                    "failure", "in", "module", ":", "exit", "code", "1"};
    std::string out;
    const auto n = pick(rng, 8);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += " ";
        std::string w = coin(rng, 0.25) ? keywords[pick(rng, keywords.size())] : filler[pick(rng, filler.size())];
        for (auto& c : w)
            if (coin(rng, 0.3) && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        out += w;
    }
    return out;
}

}  // namespace testsupport
