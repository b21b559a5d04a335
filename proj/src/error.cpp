// SPDX-License-Identifier: MIT
#include "ivsurf/error.hpp"

namespace ivsurf {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Domain: return "Domain";
        case ErrorCode::NoBracket: return "NoBracket";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::BadSpec: return "BadSpec";
        case ErrorCode::Singular: return "Singular";
        case ErrorCode::OutOfSquare: return "OutOfSquare";
        case ErrorCode::DegenerateGradient: return "DegenerateGradient";
        case ErrorCode::InnerNoConvergence: return "InnerNoConvergence";
        case ErrorCode::OuterNoConvergence: return "OuterNoConvergence";
        case ErrorCode::CflExploded: return "CflExploded";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::Config: return "Config";
    }
    return "Unknown";
}

}  // namespace ivsurf
