#include "repairenv/error.hpp"

namespace repairenv {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::UnknownFixture: return "UnknownFixture";
    case Errc::RolloutIdCollision: return "RolloutIdCollision";
    case Errc::IoFailure: return "IoFailure";
    case Errc::UnknownSnapshot: return "UnknownSnapshot";
    case Errc::InvalidFixture: return "InvalidFixture";
    case Errc::MalformedToolCall: return "MalformedToolCall";
    case Errc::UnknownTool: return "UnknownTool";
    case Errc::MissingParameter: return "MissingParameter";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::EmptyKnowledgeBase: return "EmptyKnowledgeBase";
    case Errc::NotFound: return "NotFound";
    case Errc::MissingVerdict: return "MissingVerdict";
    case Errc::PolicyUnreachable: return "PolicyUnreachable";
    case Errc::FixErrorArityMismatch: return "FixErrorArityMismatch";
    case Errc::NoTransitions: return "NoTransitions";
    case Errc::PatchConflict: return "PatchConflict";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace repairenv
