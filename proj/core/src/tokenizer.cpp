#include "repairenv/tokenizer.hpp"

#include <array>
#include <cctype>
#include <string>

#include "repairenv/tool_protocol.hpp"

namespace repairenv {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

std::size_t marker_at(std::string_view text, std::size_t pos) {
    static constexpr std::array<std::string_view, 4> kMarkers = {kThinkClose, kToolCallClose, kThinkOpen,
                                                                 kToolCallOpen};
    if (text[pos] != '<') return 0;
    for (auto m : kMarkers)
        if (text.substr(pos, m.size()) == m) return m.size();
    return 0;
}

}  // namespace

std::size_t WhitespacePunctTokenizer::count(std::string_view text) const {
    std::size_t tokens = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size();) {
        if (auto m = marker_at(text, i); m > 0) {
            in_word = false;
            i += m;
            continue;
        }
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            in_word = false;
        } else if (is_word_byte(c)) {
            if (!in_word) ++tokens;
            in_word = true;
        } else {
            ++tokens;
            in_word = false;
        }
        ++i;
    }
    return tokens;
}

const Tokenizer& default_tokenizer() {
    static const WhitespacePunctTokenizer tokenizer;
    return tokenizer;
}

}  // namespace repairenv
