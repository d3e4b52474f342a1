#include "repairenv/unified_diff.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "repairenv/error.hpp"

namespace repairenv {

namespace {

struct Line {
    std::string_view text;
    bool newline = true;

    friend bool operator==(const Line&, const Line&) = default;
};

std::vector<Line> split_lines(std::string_view bytes) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back({bytes.substr(pos), false});
            break;
        }
        lines.push_back({bytes.substr(pos, nl - pos), true});
        pos = nl + 1;
    }
    return lines;
}

enum class Op { Equal, Delete, Insert };

struct Edit {
    Op op;
    std::size_t old_index;
    std::size_t new_index;
};

// Myers' O(ND) greedy shortest edit script.
std::vector<Edit> myers(const std::vector<Line>& a, const std::vector<Line>& b) {
    const long n = static_cast<long>(a.size());
    const long m = static_cast<long>(b.size());
    const long max = n + m;
    const long offset = max + 1;
    std::vector<long> v(static_cast<std::size_t>(2 * max + 3), 0);
    std::vector<std::vector<long>> trace;

    long found_d = 0;
    bool done = (max == 0);
    for (long d = 0; d <= max && !done; ++d) {
        trace.push_back(v);
        for (long k = -d; k <= d; k += 2) {
            long x;
            if (k == -d || (k != d && v[offset + k - 1] < v[offset + k + 1]))
                x = v[offset + k + 1];
            else
                x = v[offset + k - 1] + 1;
            long y = x - k;
            while (x < n && y < m && a[x] == b[y]) {
                ++x;
                ++y;
            }
            v[offset + k] = x;
            if (x >= n && y >= m) {
                found_d = d;
                done = true;
                break;
            }
        }
    }

    std::vector<Edit> edits;
    long x = n;
    long y = m;
    for (long d = found_d; d > 0; --d) {
        const auto& vd = trace[static_cast<std::size_t>(d)];
        const long k = x - y;
        long prev_k;
        if (k == -d || (k != d && vd[offset + k - 1] < vd[offset + k + 1]))
            prev_k = k + 1;
        else
            prev_k = k - 1;
        const long prev_x = vd[offset + prev_k];
        const long prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            --x;
            --y;
            edits.push_back({Op::Equal, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
        }
        if (x == prev_x) {
            --y;
            edits.push_back({Op::Insert, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
        } else {
            --x;
            edits.push_back({Op::Delete, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
        }
    }
    while (x > 0 && y > 0) {
        --x;
        --y;
        edits.push_back({Op::Equal, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
    }
    std::reverse(edits.begin(), edits.end());
    return edits;
}

void emit_line(std::string& out, char prefix, const Line& line) {
    out.push_back(prefix);
    out.append(line.text);
    out.push_back('\n');
    if (!line.newline) out += "\\ No newline at end of file\n";
}

std::string range(std::size_t start, std::size_t count) {
    // Zero-length ranges point at the line before the change, as diff(1) does.
    const std::size_t shown = count == 0 ? start : start + 1;
    return std::to_string(shown) + "," + std::to_string(count);
}

std::string mode_of(const FileEntry& e) { return e.executable ? "100755" : "100644"; }

}  // namespace

std::string diff_file(const std::string& path, const std::optional<FileEntry>& before,
                      const std::optional<FileEntry>& after, int context) {
    if (!before && !after) return {};
    if (before && after && before->bytes == after->bytes) return {};

    std::string out = "diff --git a/" + path + " b/" + path + "\n";
    if (!before) out += "new file mode " + mode_of(*after) + "\n";
    if (!after) out += "deleted file mode " + mode_of(*before) + "\n";

    const std::string empty;
    const auto a = split_lines(before ? std::string_view(before->bytes) : std::string_view(empty));
    const auto b = split_lines(after ? std::string_view(after->bytes) : std::string_view(empty));
    if (a.empty() && b.empty()) return out;  // empty file created or removed

    out += before ? "--- a/" + path + "\n" : "--- /dev/null\n";
    out += after ? "+++ b/" + path + "\n" : "+++ /dev/null\n";

    const auto edits = myers(a, b);
    const auto ctx = static_cast<std::size_t>(std::max(context, 0));

    std::size_t i = 0;
    while (i < edits.size()) {
        while (i < edits.size() && edits[i].op == Op::Equal) ++i;
        if (i == edits.size()) break;

        std::size_t begin = i >= ctx ? i - ctx : 0;
        // Extend until a run of unchanged lines longer than two contexts separates changes.
        std::size_t end = i;
        while (end < edits.size()) {
            if (edits[end].op != Op::Equal) {
                ++end;
                continue;
            }
            std::size_t run = end;
            while (run < edits.size() && edits[run].op == Op::Equal) ++run;
            if (run == edits.size() || run - end > 2 * ctx) {
                end = std::min(run, end + ctx);
                break;
            }
            end = run;
        }

        std::size_t old_start = edits[begin].old_index;
        std::size_t new_start = edits[begin].new_index;
        std::size_t old_count = 0;
        std::size_t new_count = 0;
        std::string body;
        for (std::size_t e = begin; e < end; ++e) {
            switch (edits[e].op) {
            case Op::Equal:
                emit_line(body, ' ', a[edits[e].old_index]);
                ++old_count;
                ++new_count;
                break;
            case Op::Delete:
                emit_line(body, '-', a[edits[e].old_index]);
                ++old_count;
                break;
            case Op::Insert:
                emit_line(body, '+', b[edits[e].new_index]);
                ++new_count;
                break;
            }
        }
        out += "@@ -" + range(old_start, old_count) + " +" + range(new_start, new_count) + " @@\n";
        out += body;
        i = end;
    }
    return out;
}

std::string Patch::to_unified() const {
    std::string out;
    for (const auto& h : hunks) out += h.diff;
    return out;
}

Patch diff_trees(const FileTree& before, const FileTree& after, int context) {
    Patch patch;
    patch.base_digest = digest_tree(before);
    auto bi = before.begin();
    auto ai = after.begin();
    auto emit = [&](const std::string& path, std::optional<FileEntry> b, std::optional<FileEntry> a) {
        auto text = diff_file(path, b, a, context);
        if (!text.empty()) patch.hunks.push_back({path, std::move(text)});
    };
    while (bi != before.end() || ai != after.end()) {
        if (ai == after.end() || (bi != before.end() && bi->first < ai->first)) {
            emit(bi->first, bi->second, std::nullopt);
            ++bi;
        } else if (bi == before.end() || ai->first < bi->first) {
            emit(ai->first, std::nullopt, ai->second);
            ++ai;
        } else {
            emit(bi->first, bi->second, ai->second);
            ++bi;
            ++ai;
        }
    }
    return patch;
}

Patch parse_patch(std::string_view text) {
    Patch patch;
    std::size_t pos = 0;
    static constexpr std::string_view kHeader = "diff --git a/";
    if (!text.empty() && !text.starts_with(kHeader))
        throw Error(Errc::PatchConflict, "patch text does not start with a diff header");
    while (pos < text.size()) {
        std::size_t next = text.find(std::string("\n") + std::string(kHeader), pos);
        std::size_t end = next == std::string_view::npos ? text.size() : next + 1;
        auto section = text.substr(pos, end - pos);
        auto first_nl = section.find('\n');
        auto header = section.substr(kHeader.size(), first_nl - kHeader.size());
        auto sep = header.rfind(" b/");
        if (sep == std::string_view::npos) throw Error(Errc::PatchConflict, "bad diff header");
        patch.hunks.push_back({std::string(header.substr(0, sep)), std::string(section)});
        pos = end;
    }
    return patch;
}

namespace {

struct Hunk {
    std::size_t old_start = 0;
    std::size_t old_count = 0;
    std::size_t new_start = 0;
    std::size_t new_count = 0;
    std::vector<std::pair<char, Line>> lines;
};

struct ParsedFile {
    bool created = false;
    bool deleted = false;
    bool executable = false;
    std::vector<Hunk> hunks;
};

std::size_t parse_number(std::string_view s, std::size_t& pos) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
    if (ec != std::errc()) throw Error(Errc::PatchConflict, "bad hunk header");
    pos = static_cast<std::size_t>(ptr - s.data());
    return value;
}

void parse_range(std::string_view s, std::size_t& pos, std::size_t& start, std::size_t& count) {
    start = parse_number(s, pos);
    count = 1;
    if (pos < s.size() && s[pos] == ',') {
        ++pos;
        count = parse_number(s, pos);
    }
}

ParsedFile parse_file_section(std::string_view section) {
    ParsedFile file;
    const auto lines = split_lines(section);
    Hunk* current = nullptr;
    std::size_t old_seen = 0;
    std::size_t new_seen = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto t = lines[i].text;
        if (t.starts_with('\\')) {
            if (!file.hunks.empty() && !file.hunks.back().lines.empty())
                file.hunks.back().lines.back().second.newline = false;
            continue;
        }
        if (current != nullptr && !t.empty() && (t[0] == ' ' || t[0] == '-' || t[0] == '+')) {
            if (t[0] != '+') ++old_seen;
            if (t[0] != '-') ++new_seen;
            current->lines.push_back({t[0], Line{t.substr(1), true}});
            if (old_seen >= current->old_count && new_seen >= current->new_count) current = nullptr;
            continue;
        }
        if (t.starts_with("new file mode ")) {
            file.created = true;
            file.executable = t.ends_with("755");
        } else if (t.starts_with("deleted file mode ")) {
            file.deleted = true;
        } else if (t.starts_with("@@ -")) {
            Hunk h;
            std::size_t pos = 4;
            parse_range(t, pos, h.old_start, h.old_count);
            if (pos + 2 > t.size() || t.substr(pos, 2) != " +")
                throw Error(Errc::PatchConflict, "bad hunk header");
            pos += 2;
            parse_range(t, pos, h.new_start, h.new_count);
            file.hunks.push_back(std::move(h));
            current = &file.hunks.back();
            old_seen = 0;
            new_seen = 0;
            if (current->old_count == 0 && current->new_count == 0) current = nullptr;
        }
    }
    return file;
}

}  // namespace

FileTree apply_patch(const FileTree& base, const Patch& patch) {
    FileTree result = base;
    for (const auto& fp : patch.hunks) {
        const auto parsed = parse_file_section(fp.diff);
        auto it = result.find(fp.path);
        if (parsed.created && it != result.end())
            throw Error(Errc::PatchConflict, fp.path + ": already exists");
        if (!parsed.created && it == result.end())
            throw Error(Errc::PatchConflict, fp.path + ": missing in base");

        const std::string original = parsed.created ? std::string() : it->second.bytes;
        const auto old_lines = split_lines(original);
        std::vector<Line> new_lines;
        std::size_t cursor = 0;
        for (const auto& h : parsed.hunks) {
            const std::size_t start = h.old_count == 0 ? h.old_start : h.old_start - 1;
            if (start < cursor || start > old_lines.size())
                throw Error(Errc::PatchConflict, fp.path + ": hunk out of range");
            new_lines.insert(new_lines.end(), old_lines.begin() + static_cast<long>(cursor),
                             old_lines.begin() + static_cast<long>(start));
            cursor = start;
            for (const auto& [tag, line] : h.lines) {
                if (tag == ' ' || tag == '-') {
                    if (cursor >= old_lines.size() || !(old_lines[cursor] == line))
                        throw Error(Errc::PatchConflict, fp.path + ": context mismatch");
                    ++cursor;
                }
                if (tag == ' ' || tag == '+') new_lines.push_back(line);
            }
        }
        new_lines.insert(new_lines.end(), old_lines.begin() + static_cast<long>(cursor), old_lines.end());

        if (parsed.deleted) {
            if (!new_lines.empty()) throw Error(Errc::PatchConflict, fp.path + ": deletion leaves content");
            result.erase(it);
            continue;
        }
        std::string bytes;
        for (const auto& l : new_lines) {
            bytes.append(l.text);
            if (l.newline) bytes.push_back('\n');
        }
        if (parsed.created) {
            result.emplace(fp.path, FileEntry{std::move(bytes), parsed.executable});
        } else {
            it->second.bytes = std::move(bytes);
        }
    }
    return result;
}

}  // namespace repairenv
