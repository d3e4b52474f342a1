#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repairenv {

enum class Errc {
    UnknownFixture,
    RolloutIdCollision,
    IoFailure,
    UnknownSnapshot,
    InvalidFixture,
    MalformedToolCall,
    UnknownTool,
    MissingParameter,
    InvalidParameter,
    EmptyKnowledgeBase,
    NotFound,
    MissingVerdict,
    PolicyUnreachable,
    FixErrorArityMismatch,
    NoTransitions,
    PatchConflict,
    InvalidArgument,
    ConfigError,
};

std::string_view to_string(Errc code) noexcept;

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace repairenv
