#pragma once

#include <stdexcept>
#include <string>

namespace pesto {

/// Malformed file contents (bad magic, truncated payload, unparsable text).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Recognized format but a codec/feature we do not handle.
struct UnsupportedError : std::runtime_error {
    explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Caller violated a documented precondition or invariant.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values encountered where the pipeline cannot continue.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int kVersionMajor = 0;
inline constexpr int kVersionMinor = 1;

} // namespace pesto
