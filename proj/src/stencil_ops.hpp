// SPDX-License-Identifier: MIT
#pragma once

#include "ivsurf/meshkit.hpp"

namespace ivsurf::detail {

/// Row (i-1, i, i+1) of diff * d2/dx2 + conv * d/dx. Central differencing is kept
/// while both off-diagonals stay non-negative; otherwise the convection part falls
/// back to first-order upwinding by the sign of conv.
inline Weights3 diffusion_convection(double diff, double conv, const StencilSet& s, std::size_t i) {
    const Weights3& d2 = s.second[i];
    const Weights3& d1 = s.central[i];
    Weights3 t{diff * d2[0] + conv * d1[0], diff * d2[1] + conv * d1[1], diff * d2[2] + conv * d1[2]};
    if (t[0] >= 0.0 && t[2] >= 0.0) return t;
    if (conv > 0.0) {
        const Weights3& f = s.forward1[i];  // (w_i, w_{i+1}, 0)
        return {diff * d2[0], diff * d2[1] + conv * f[0], diff * d2[2] + conv * f[1]};
    }
    const Weights3& b = s.backward1[i];  // (0, w_{i-1}, w_i)
    return {diff * d2[0] + conv * b[1], diff * d2[1] + conv * b[2], diff * d2[2]};
}

}  // namespace ivsurf::detail
