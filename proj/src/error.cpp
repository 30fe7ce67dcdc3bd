#include "platoon/error.hpp"

namespace platoon {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NoEquilibrium: return "NoEquilibrium";
        case ErrorKind::DegenerateLinearization: return "DegenerateLinearization";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotRing: return "NotRing";
        case ErrorKind::EigenFailure: return "EigenFailure";
        case ErrorKind::NotHurwitz: return "NotHurwitz";
        case ErrorKind::SolverFailure: return "SolverFailure";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::NumericalTrouble: return "NumericalTrouble";
        case ErrorKind::RecoveryIllConditioned: return "RecoveryIllConditioned";
        case ErrorKind::VerificationFailed: return "VerificationFailed";
        case ErrorKind::RobustVerificationFailed: return "RobustVerificationFailed";
        case ErrorKind::EmptyUncertainty: return "EmptyUncertainty";
        case ErrorKind::PreconditionViolation: return "PreconditionViolation";
        case ErrorKind::Collision: return "Collision";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace platoon
