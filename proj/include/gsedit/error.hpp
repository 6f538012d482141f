#pragma once

#include <stdexcept>
#include <string>

namespace gsedit {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
    Input,                 // bad paths, config, flags
    Format,                // malformed file contents
    Data,                  // well-formed file with invalid values
    Contract,              // caller broke a precondition (size mismatch etc.)
    LocalizationFailed,    // prompt produced no edit region
    InitializationFailed,  // no usable pixel for new Gaussians
    DegenerateCalibration, // zero spread in disparity statistics
    Oracle,                // oracle / bridge failure
    Numeric,               // non-finite loss or state
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Exit codes: 0 ok, 2 input/config, 3 localization, 4 initialization,
/// 5 oracle/bridge, 6 numeric abort.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input:
        case ErrorKind::Format:
        case ErrorKind::Data:
        case ErrorKind::Contract:
            return 2;
        case ErrorKind::LocalizationFailed:
            return 3;
        case ErrorKind::InitializationFailed:
        case ErrorKind::DegenerateCalibration:
            return 4;
        case ErrorKind::Oracle:
            return 5;
        case ErrorKind::Numeric:
            return 6;
    }
    return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorKind::Contract, message);
}

}  // namespace gsedit
