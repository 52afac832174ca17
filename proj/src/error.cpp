#include "mobiload/error.hpp"

namespace mobiload {

std::string_view kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::GapTooLarge: return "GapTooLarge";
        case ErrorKind::InvalidData: return "InvalidData";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::DegenerateChannel: return "DegenerateChannel";
        case ErrorKind::SpanTooShort: return "SpanTooShort";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::UnknownTask: return "UnknownTask";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::ZeroActual: return "ZeroActual";
        case ErrorKind::MismatchedTestSets: return "MismatchedTestSets";
        case ErrorKind::WindowTooShort: return "WindowTooShort";
        case ErrorKind::ModelWithoutMobility: return "ModelWithoutMobility";
        case ErrorKind::SpanMismatch: return "SpanMismatch";
        case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
        case ErrorKind::LayoutMismatch: return "LayoutMismatch";
        case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace mobiload
