#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace platoon {

enum class ErrorKind {
    InvalidArgument,
    NoEquilibrium,
    DegenerateLinearization,
    DimensionMismatch,
    NotRing,
    EigenFailure,
    NotHurwitz,
    SolverFailure,
    Infeasible,
    NumericalTrouble,
    RecoveryIllConditioned,
    VerificationFailed,
    RobustVerificationFailed,
    EmptyUncertainty,
    PreconditionViolation,
    Collision,
    ConfigError,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

// Every module reports failures through this type; `kind()` is what the CLI
// serializes into its error JSON.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace platoon
