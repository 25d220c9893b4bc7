#pragma once

/**
 * @file errors.hpp
 * @brief Error codes and the exception type thrown by the adhesion solvers.
 */

#include <stdexcept>
#include <string>
#include <string_view>

namespace adhesion {

enum class ErrorCode {
    InitialMassOutOfRange,
    NegativeInitialDensity,
    BadBirthRateBounds,
    MisalignedGrid,
    InvalidParameter,
    NegativeAge,
    MassBlowup,
    NonFiniteDensity,
    DroppedMassBudget,
    HistoryGap,
    MissingSnapshots,
    DivisionByZeroMass,
    NonFiniteElongation,
    NoContraction,
    WindowUnderflow,
    ZeroMass,
    GridMismatch,
    BadCoefficients,
    BadGamma0,
    NonPositiveWindow,
    HypothesisViolated,
    ConfigNotFound,
    ConfigInvalid,
    InsufficientLevels,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InitialMassOutOfRange: return "InitialMassOutOfRange";
        case ErrorCode::NegativeInitialDensity: return "NegativeInitialDensity";
        case ErrorCode::BadBirthRateBounds: return "BadBirthRateBounds";
        case ErrorCode::MisalignedGrid: return "MisalignedGrid";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::NegativeAge: return "NegativeAge";
        case ErrorCode::MassBlowup: return "MassBlowup";
        case ErrorCode::NonFiniteDensity: return "NonFiniteDensity";
        case ErrorCode::DroppedMassBudget: return "DroppedMassBudget";
        case ErrorCode::HistoryGap: return "HistoryGap";
        case ErrorCode::MissingSnapshots: return "MissingSnapshots";
        case ErrorCode::DivisionByZeroMass: return "DivisionByZeroMass";
        case ErrorCode::NonFiniteElongation: return "NonFiniteElongation";
        case ErrorCode::NoContraction: return "NoContraction";
        case ErrorCode::WindowUnderflow: return "WindowUnderflow";
        case ErrorCode::ZeroMass: return "ZeroMass";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::BadCoefficients: return "BadCoefficients";
        case ErrorCode::BadGamma0: return "BadGamma0";
        case ErrorCode::NonPositiveWindow: return "NonPositiveWindow";
        case ErrorCode::HypothesisViolated: return "HypothesisViolated";
        case ErrorCode::ConfigNotFound: return "ConfigNotFound";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::InsufficientLevels: return "InsufficientLevels";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace adhesion
