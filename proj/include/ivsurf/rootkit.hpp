// SPDX-License-Identifier: MIT
#pragma once

#include <functional>
#include <optional>

#include "ivsurf/analytics.hpp"

namespace ivsurf {

struct RootConfig {
    double abs_tol = 1e-13;
    double rel_tol = 1e-14;
    int max_iter = 200;
};

struct Bracket {
    double lo;
    double hi;
};

/// Function value and derivative; a non-finite derivative means "unavailable".
struct FnEval {
    double f;
    double df;
};

/// Newton iteration safeguarded by bisection: any Newton step that leaves the
/// current bracket, or that comes without a usable derivative, is replaced by a
/// bisection step. Stops when |f| <= abs_tol or the step or bracket width drops
/// below rel_tol * |x|. Throws NoBracket or NoConvergence.
double solve_root(const std::function<FnEval(double)>& f, Bracket bracket, const RootConfig& cfg,
                  std::optional<double> guess = std::nullopt);

/// Derivative-free overload (pure bisection).
double solve_root(const std::function<double(double)>& f, Bracket bracket, const RootConfig& cfg);

/// How prices on (or within 1e-12 S of) an arbitrage bound are resolved.
struct BoundaryPolicy {
    double z_floor_rel = 1e-10;  ///< zero-price edge solves V = z_floor_rel * upper bound
    double delta_S_rel = 1e-3;   ///< upper edge solves V = upper bound * (1 - delta_S_rel)
};

/// Total implied volatility w with bs_price(m, key, w) = Z.
/// Throws OutOfBounds when Z is outside the closed arbitrage interval.
double implied_total_vol(const MarketParams& m, const OptionKey& key, double Z,
                         const RootConfig& cfg = {}, const BoundaryPolicy& policy = {});

}  // namespace ivsurf
