#pragma once

#include <stdexcept>
#include <string>

namespace sepqn {

enum class ErrorCode {
    DimensionMismatch,
    InvalidArgument,
    LineSearchFailure,
    NonFinite,
    Parse,
    Unsupported,
    Io,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. `code()` is stable and machine readable; the
/// message carries the human-oriented diagnostics.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void throw_dimension(const std::string& where, long expected, long actual);

}  // namespace sepqn
