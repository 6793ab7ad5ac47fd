#pragma once

#include <stdexcept>
#include <string>

namespace voxnox {

enum class ErrorCode {
    dimension_mismatch,
    invalid_argument,
    cyclic_genome,
    empty_input,
    format,
    io,
    degenerate,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; `code()` lets callers
// branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    // Message without the code prefix, for wrapping with more context.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::cyclic_genome: return "cyclic genome";
    case ErrorCode::empty_input: return "empty input";
    case ErrorCode::format: return "format error";
    case ErrorCode::io: return "io error";
    case ErrorCode::degenerate: return "degenerate";
    }
    return "error";
}

} // namespace voxnox
