#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace detdyn {

enum class ErrorKind {
    // input / contract errors
    NonSquare,
    DimensionMismatch,
    NonFinite,
    InvalidArgument,
    ParseError,
    RaggedRows,
    NotTwoDimensional,
    // hypothesis violations of the underlying identities
    Singular,
    IntermediateSingular,
    NonPositiveDeterminant,
    NonSymmetricUpdate,
    IndexGreaterThanOne,
    AllCoefficientsBelowTolerance,
    CompatibilityViolated,
    NullityMismatch,
    ResolventSingular,
    BaseNotHurwitz,
    NotPositiveDefinite,
    NotPSD,
    // numerical diagnostics
    RootFindDivergence,
    ScheduleTooShort,
    NotConverged,
    ContourTooCoarse,
    EigenvalueOnContour,
    WindingMismatch,
};

enum class ErrorCategory { Input, Hypothesis, Numerical };

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonSquare: return "NonSquare";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::RaggedRows: return "RaggedRows";
        case ErrorKind::NotTwoDimensional: return "NotTwoDimensional";
        case ErrorKind::Singular: return "Singular";
        case ErrorKind::IntermediateSingular: return "IntermediateSingular";
        case ErrorKind::NonPositiveDeterminant: return "NonPositiveDeterminant";
        case ErrorKind::NonSymmetricUpdate: return "NonSymmetricUpdate";
        case ErrorKind::IndexGreaterThanOne: return "IndexGreaterThanOne";
        case ErrorKind::AllCoefficientsBelowTolerance: return "AllCoefficientsBelowTolerance";
        case ErrorKind::CompatibilityViolated: return "CompatibilityViolated";
        case ErrorKind::NullityMismatch: return "NullityMismatch";
        case ErrorKind::ResolventSingular: return "ResolventSingular";
        case ErrorKind::BaseNotHurwitz: return "BaseNotHurwitz";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::NotPSD: return "NotPSD";
        case ErrorKind::RootFindDivergence: return "RootFindDivergence";
        case ErrorKind::ScheduleTooShort: return "ScheduleTooShort";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::ContourTooCoarse: return "ContourTooCoarse";
        case ErrorKind::EigenvalueOnContour: return "EigenvalueOnContour";
        case ErrorKind::WindingMismatch: return "WindingMismatch";
    }
    return "Unknown";
}

constexpr ErrorCategory category_of(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonSquare:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::NonFinite:
        case ErrorKind::InvalidArgument:
        case ErrorKind::ParseError:
        case ErrorKind::RaggedRows:
        case ErrorKind::NotTwoDimensional:
        case ErrorKind::ScheduleTooShort:
            return ErrorCategory::Input;
        case ErrorKind::RootFindDivergence:
        case ErrorKind::NotConverged:
        case ErrorKind::ContourTooCoarse:
        case ErrorKind::EigenvalueOnContour:
        case ErrorKind::WindingMismatch:
            return ErrorCategory::Numerical;
        default:
            return ErrorCategory::Hypothesis;
    }
}

/// Base of every exception thrown by the library. The kind identifies which
/// contract or hypothesis failed; derived types carry structured payloads.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
};

/// Raised with the index k of the first update step whose partial sum breaks
/// the hypothesis (k = 0 refers to the base matrix itself).
class StepError : public Error {
public:
    StepError(ErrorKind kind, std::size_t step, const std::string& what)
        : Error(kind, what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : Error(ErrorKind::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) fail(kind, what);
}

}  // namespace detail
}  // namespace detdyn
