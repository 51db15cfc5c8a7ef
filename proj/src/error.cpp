#include "grae/error.hpp"

namespace grae {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::ZeroColumn: return "ZeroColumn";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptDocument: return "CorruptDocument";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace grae
