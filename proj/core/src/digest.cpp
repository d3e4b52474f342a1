#include "repairenv/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>

#include "repairenv/error.hpp"

namespace repairenv {

namespace fs = std::filesystem;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error(Errc::IoFailure, "sha256 init failed");
    }

    void update(std::string_view bytes) {
        EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    }

    void update_u64(std::uint64_t v) {
        std::array<char, 8> buf{};
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        update({buf.data(), buf.size()});
    }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
        static constexpr char kHex[] = "0123456789abcdef";
        std::string s;
        s.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            s.push_back(kHex[out[i] >> 4]);
            s.push_back(kHex[out[i] & 0xf]);
        }
        return s;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex();
}

TreeDigest digest_tree(const FileTree& tree) {
    // Length-prefixed framing keeps (path, bytes) boundaries unambiguous.
    Sha256 h;
    h.update_u64(tree.size());
    for (const auto& [path, entry] : tree) {
        h.update_u64(path.size());
        h.update(path);
        h.update_u64(entry.bytes.size());
        h.update(entry.bytes);
    }
    return TreeDigest{h.hex()};
}

TreeDigest digest_directory(const fs::path& root) { return digest_tree(read_tree(root)); }

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoFailure, "short write " + path.string());
}

FileTree read_tree(const fs::path& root, const std::set<std::string>& exclude) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(Errc::IoFailure, "not a directory: " + root.string());

    FileTree tree;
    fs::recursive_directory_iterator it(root, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot list " + root.string() + ": " + ec.message());
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) throw Error(Errc::IoFailure, "cannot list " + root.string() + ": " + ec.message());
        const auto rel = fs::relative(it->path(), root).generic_string();
        if (it.depth() == 0 && exclude.contains(rel)) {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (it->is_symlink() || !it->is_regular_file()) continue;
        FileEntry entry;
        entry.bytes = read_file_bytes(it->path());
        const auto perms = it->status().permissions();
        entry.executable = (perms & fs::perms::owner_exec) != fs::perms::none;
        tree.emplace(rel, std::move(entry));
    }
    return tree;
}

void write_tree(const fs::path& root, const FileTree& tree) {
    std::error_code ec;
    fs::create_directories(root, ec);
    for (const auto& [rel, entry] : tree) {
        const auto target = root / fs::path(rel);
        write_file_bytes(target, entry.bytes);
        auto perms = fs::perms::owner_read | fs::perms::owner_write | fs::perms::group_read |
                     fs::perms::others_read;
        if (entry.executable)
            perms |= fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec;
        fs::permissions(target, perms, ec);
    }
}

void clear_directory(const fs::path& root) {
    std::error_code ec;
    if (!fs::exists(root, ec)) {
        fs::create_directories(root, ec);
        return;
    }
    for (const auto& entry : fs::directory_iterator(root, ec)) {
        fs::remove_all(entry.path(), ec);
        if (ec) throw Error(Errc::IoFailure, "cannot remove " + entry.path().string());
    }
}

}  // namespace repairenv
