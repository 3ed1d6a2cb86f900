#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refpoint {

/// Failure categories shared by every module. The CLI maps them to exit codes.
enum class Errc {
    InvalidArgument,
    DegenerateFootprint,
    OriginTarget,
    EmptyModality,
    InsufficientCoverage,
    UnknownTarget,
    UnknownPose,
    ShapeMismatch,
    ZeroPrediction,
    ZeroVector,
    EmptySplit,
    SplitLeak,
    EmptyInput,
    EmptyFilter,
    TooFewUsers,
    IoError,
    FormatError,
    CorpusError,
    NumericalFailure,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace refpoint
