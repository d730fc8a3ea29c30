#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace heat {

enum class ErrorCode {
    DimensionMismatch,
    NotPositiveDefinite,
    EmptyInput,
    EmptyBatch,
    ClassTooSmall,
    NotFitted,
    EmptyDataset,
    NonFiniteLoss,
    NonFiniteValue,
    DegenerateEnergies,
    NotStandardized,
    MismatchedScorerCount,
    EmptySet,
    ParseError,
    ShapeMismatch,
    BadMagic,
    UnsupportedVersion,
    CorruptSection,
    InvalidSpec,
    TooSmall,
    IoError,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// CLI (and tests) can dispatch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    ErrorCode code() const noexcept { return code_; }
    // The description without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace heat
