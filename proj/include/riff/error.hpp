#pragma once

#include <stdexcept>
#include <string>

namespace riff {

/// Error carrying a stable machine-readable code (e.g. "unknown_meeting",
/// "degenerate_variance") alongside a human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Raised for input that fails validation (bad files, bad arguments).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Raised when a statistic cannot be computed from the data
/// (zero variance, single-class outcome, separation).
class DegenerateError : public Error {
public:
    using Error::Error;
};

}  // namespace riff
