#include "refpoint/error.hpp"

namespace refpoint {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::DegenerateFootprint: return "DegenerateFootprint";
        case Errc::OriginTarget: return "OriginTarget";
        case Errc::EmptyModality: return "EmptyModality";
        case Errc::InsufficientCoverage: return "InsufficientCoverage";
        case Errc::UnknownTarget: return "UnknownTarget";
        case Errc::UnknownPose: return "UnknownPose";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::ZeroPrediction: return "ZeroPrediction";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::EmptySplit: return "EmptySplit";
        case Errc::SplitLeak: return "SplitLeak";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::EmptyFilter: return "EmptyFilter";
        case Errc::TooFewUsers: return "TooFewUsers";
        case Errc::IoError: return "IoError";
        case Errc::FormatError: return "FormatError";
        case Errc::CorpusError: return "CorpusError";
        case Errc::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

}  // namespace refpoint
