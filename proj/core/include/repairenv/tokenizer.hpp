#pragma once

#include <cstddef>
#include <string_view>

namespace repairenv {

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    [[nodiscard]] virtual std::size_t count(std::string_view text) const = 0;
};

/// Word runs (ASCII alphanumerics, '_' and any non-ASCII byte) count as one token each;
/// every other non-space character is its own token. The <think>/<tool_call> delimiters
/// are control markers and count as separators, so a message's token total equals the
/// sum over its thinking, visible and tool-call segments.
class WhitespacePunctTokenizer final : public Tokenizer {
public:
    [[nodiscard]] std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

}  // namespace repairenv
