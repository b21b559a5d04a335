// SPDX-License-Identifier: MIT
#pragma once

#include <vector>

#include "ivsurf/analytics.hpp"
#include "ivsurf/meshkit.hpp"
#include "ivsurf/rootkit.hpp"

namespace ivsurf {

/// Call-price domain at one maturity, mapped affinely onto the unit square:
///   Z = S Q_T u,   K = F (1 - u) + (K_max - F) v.
struct DomainSpec {
    MarketParams market;
    double K_max = 0.0;
    double T = 0.0;
    double D = 1.0;   ///< discount factor D_T
    double Q = 1.0;   ///< appreciation factor Q_T
    double F = 0.0;   ///< forward S Q_T / D_T
    double a = 0.0;   ///< 1 / (S Q_T)
    double c1 = 0.0;  ///< 1 / (D_T K_max - S Q_T)

    double SQ() const { return market.S * Q; }

    /// Throws BadSpec unless T > 0 and K_max > F.
    static DomainSpec make(const MarketParams& m, double K_max, double T);
};

struct StrikePrice {
    double K;
    double Z;
};

struct UnitPoint {
    double u;
    double v;
};

/// Throws OutOfSquare outside [0, 1]^2.
StrikePrice map_coordinates(const DomainSpec& spec, double u, double v);

/// Inverse map; throws OutOfSquare if (K, Z) lies outside the mapped square.
UnitPoint inverse_map(const DomainSpec& spec, double K, double Z);

/// sqrt(2) [ sqrt(ln(K/F) + ln(SQ/Z)) - sqrt(ln(SQ/Z)) ] with no argument checks.
double large_strike_formula(double K, double F, double SQ, double Z);

/// Large-strike asymptotic total volatility. Throws Domain unless K > F and 0 < Z <= S Q_T.
double sigma_asymptotic_large_strike(const DomainSpec& spec, double K, double Z);

/// Solves V(K, w) = Q_T (S - delta_S) for w by safeguarded root search.
/// Returns 0 when the target sits on or below the lower arbitrage bound.
double sigma_near_upper_price(const DomainSpec& spec, double K, double delta_S, const RootConfig& cfg = {});

/// Smallest positive root of the large-w expansion of V(K, w) = Q_T (S - delta_S)
/// truncated at delta = 0, a cubic in x = w^2. Returns sqrt(x).
double sigma_near_upper_cubic(const DomainSpec& spec, double K);

/// Dirichlet data on the four edges of the unit square.
///   u0, u1: indexed by v node (size N_v + 1)
///   v0, v1: indexed by u node (size N_u + 1)
/// Shared corners hold identical values.
struct BoundaryFrame {
    std::vector<double> u0;
    std::vector<double> u1;
    std::vector<double> v0;
    std::vector<double> v1;
};

/// v = 0: exact zeros. u = 0: V = z_floor. u = 1: V = Q_T (S - delta_S).
/// v = 1: V = Z solved from the large-strike initial guess.
/// Solver failures are rethrown with the edge and node index attached.
BoundaryFrame boundary_frame(const DomainSpec& spec, const Axis& au, const Axis& av, double z_floor, double delta_S,
                             bool parallel = true);

}  // namespace ivsurf
