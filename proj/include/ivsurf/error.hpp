// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace ivsurf {

enum class ErrorCode {
    Domain,
    NoBracket,
    NoConvergence,
    OutOfBounds,
    BadSpec,
    Singular,
    OutOfSquare,
    DegenerateGradient,
    InnerNoConvergence,
    OuterNoConvergence,
    CflExploded,
    GridMismatch,
    Config,
};

const char* to_string(ErrorCode code);

/// Library error. Every failure mode carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ivsurf
