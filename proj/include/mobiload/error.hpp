#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mobiload {

enum class ErrorKind {
    MissingFile,
    SchemaMismatch,
    GapTooLarge,
    InvalidData,
    InvalidSpec,
    InvalidConfig,
    DegenerateChannel,
    SpanTooShort,
    ShapeMismatch,
    DimensionMismatch,
    NonFiniteLoss,
    UnknownTask,
    EmptyInput,
    ZeroActual,
    MismatchedTestSets,
    WindowTooShort,
    ModelWithoutMobility,
    SpanMismatch,
    MissingCheckpoint,
    LayoutMismatch,
    CorruptCheckpoint,
};

std::string_view kind_name(ErrorKind kind);

// Domain error; every user/data failure in the library is raised as one of these.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace mobiload
