#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssmred {

enum class ErrorCode {
    DegenerateDenominator,
    SingularSystem,
    ComplexEigenResidual,
    InsufficientDepth,
    NearUnobservableState,
    DefectiveMatrix,
    ResolventSingular,
    UnstableSystem,
    UnstableEigenvalue,
    PhaseDegenerate,
    MatrixSingular,
    InvalidOrder,
    ClusteredSpectrum,
    LengthMismatch,
    NonFiniteLoss,
    SequenceTooShort,
    ZeroVariance,
    InvalidArgument,
    ConfigError,
    FormatError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ssmred
