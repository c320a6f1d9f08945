#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phwh {

enum class ErrorCode {
    InvalidArgument,
    NotSubGenerator,
    Reducible,
    Singular,
    DefectiveSpectrum,
    NoUpPhases,
    InconsistentR,
    IndexOutOfRange,
    DomainError,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotSubGenerator: return "NotSubGenerator";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::DefectiveSpectrum: return "DefectiveSpectrum";
    case ErrorCode::NoUpPhases: return "NoUpPhases";
    case ErrorCode::InconsistentR: return "InconsistentR";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code name so it can be reported verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace phwh
