#include "heat/error.hpp"

namespace heat {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::NotFitted: return "NotFitted";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DegenerateEnergies: return "DegenerateEnergies";
        case ErrorCode::NotStandardized: return "NotStandardized";
        case ErrorCode::MismatchedScorerCount: return "MismatchedScorerCount";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::CorruptSection: return "CorruptSection";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::TooSmall: return "TooSmall";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace heat
