// SPDX-License-Identifier: MIT
#include "ivsurf/chart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ivsurf/error.hpp"
#include "parallel.hpp"

namespace ivsurf {

DomainSpec DomainSpec::make(const MarketParams& m, double K_max, double T) {
    if (!(T > 0.0)) throw Error(ErrorCode::BadSpec, "domain needs T > 0");
    DomainSpec s;
    s.market = m;
    s.K_max = K_max;
    s.T = T;
    s.D = m.discount(T);
    s.Q = m.appreciation(T);
    s.F = m.S * s.Q / s.D;
    if (!(K_max > s.F)) throw Error(ErrorCode::BadSpec, "K_max must exceed the forward");
    s.a = 1.0 / (m.S * s.Q);
    s.c1 = 1.0 / (s.D * K_max - m.S * s.Q);
    return s;
}

StrikePrice map_coordinates(const DomainSpec& spec, double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "(u, v) = (" << u << ", " << v << ")";
        throw Error(ErrorCode::OutOfSquare, os.str());
    }
    return {spec.F * (1.0 - u) + (spec.K_max - spec.F) * v, spec.SQ() * u};
}

UnitPoint inverse_map(const DomainSpec& spec, double K, double Z) {
    const double u = Z / spec.SQ();
    const double v = (K - spec.F * (1.0 - u)) / (spec.K_max - spec.F);
    constexpr double slack = 1e-13;
    if (!(u >= -slack && u <= 1.0 + slack && v >= -slack && v <= 1.0 + slack)) {
        std::ostringstream os;
        os << "(K, Z) = (" << K << ", " << Z << ") maps to (" << u << ", " << v << ")";
        throw Error(ErrorCode::OutOfSquare, os.str());
    }
    return {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
}

double large_strike_formula(double K, double F, double SQ, double Z) {
    const double lz = std::log(SQ / Z);
    return M_SQRT2 * (std::sqrt(std::log(K / F) + lz) - std::sqrt(lz));
}

double sigma_asymptotic_large_strike(const DomainSpec& spec, double K, double Z) {
    if (!(K > spec.F)) throw Error(ErrorCode::Domain, "large-strike asymptotic needs K > F");
    if (!(Z > 0.0 && Z <= spec.SQ())) throw Error(ErrorCode::Domain, "large-strike asymptotic needs 0 < Z <= S Q_T");
    return std::max(large_strike_formula(K, spec.F, spec.SQ(), Z), 0.0);
}

namespace {

/// Call total volatility for price Z, Newton started from `guess`.
double solve_call(const DomainSpec& spec, double K, double Z, double guess, const RootConfig& cfg) {
    const OptionKey key{K, spec.T, Right::Call};
    const double SQ = spec.SQ();
    auto fn = [&](double w) {
        if (w <= 0.0) return FnEval{bs_price(spec.market, key, 0.0) - Z, std::numeric_limits<double>::quiet_NaN()};
        const auto [d1, d2] = d_values(spec.market, key, w);
        return FnEval{bs_price(spec.market, key, w) - Z, SQ * norm_pdf(d1)};
    };
    double lo = 1e-8;
    if (fn(lo).f >= 0.0) lo = 0.0;
    double hi = std::max(guess, 0.0) + 1.0;
    for (int k = 0; k < 60 && fn(hi).f < 0.0; ++k) hi *= 2.0;
    return solve_root(fn, {lo, hi}, cfg, std::clamp(guess, lo, hi));
}

/// Real roots of c3 x^3 + c2 x^2 + c1 x + c0.
std::vector<double> cubic_roots(double c3, double c2, double c1, double c0) {
    const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    std::vector<double> roots;
    if (disc > 0.0) {
        const double s = std::sqrt(disc);
        roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) - a / 3.0);
    } else {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(theta - 2.0 * M_PI * k / 3.0) - a / 3.0);
    }
    // One Newton polish per root.
    for (double& x : roots) {
        const double f = ((c3 * x + c2) * x + c1) * x + c0;
        const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
        if (df != 0.0) x -= f / df;
    }
    return roots;
}

}  // namespace

double sigma_near_upper_price(const DomainSpec& spec, double K, double delta_S, const RootConfig& cfg) {
    const OptionKey key{K, spec.T, Right::Call};
    const double target = spec.Q * (spec.market.S - delta_S);
    if (target <= price_bounds(spec.market, key).lo) return 0.0;
    const double guess = std::sqrt(2.0 * std::abs(std::log(spec.F / K)));
    return solve_call(spec, K, target, guess, cfg);
}

double sigma_near_upper_cubic(const DomainSpec& spec, double K) {
    const double L = std::log(spec.SQ() / (K * spec.D));
    const double L2 = L * L, L4 = L2 * L2, L6 = L4 * L2;
    const auto roots = cubic_roots(-48.0, 24.0 * L2 + 192.0, -6.0 * L4 - 288.0 * L2 - 2304.0,
                                   L6 + 120.0 * L4 + 5760.0 * L2 + 46080.0);
    double best = std::numeric_limits<double>::infinity();
    for (double x : roots)
        if (x > 0.0) best = std::min(best, x);
    if (!std::isfinite(best)) throw Error(ErrorCode::Domain, "cubic has no positive root");
    return std::sqrt(best);
}

BoundaryFrame boundary_frame(const DomainSpec& spec, const Axis& au, const Axis& av, double z_floor, double delta_S,
                             bool parallel) {
    const std::size_t Nu = au.N();
    const std::size_t Nv = av.N();
    const RootConfig cfg{};
    BoundaryFrame f;
    f.u0.assign(Nv + 1, 0.0);
    f.u1.assign(Nv + 1, 0.0);
    f.v0.assign(Nu + 1, 0.0);
    f.v1.assign(Nu + 1, 0.0);

    auto annotate = [](const Error& e, const char* edge, std::ptrdiff_t node) {
        std::ostringstream os;
        os << "edge " << edge << " node " << node << ": " << e.what();
        return Error(e.code(), os.str());
    };

    // Both vertical edges, v = 0 row excluded (it is identically zero).
    detail::for_each_index(static_cast<std::ptrdiff_t>(2 * Nv), parallel, [&](std::ptrdiff_t k) {
        const bool upper = k >= static_cast<std::ptrdiff_t>(Nv);
        const std::size_t j = 1 + static_cast<std::size_t>(upper ? k - Nv : k);
        try {
            if (upper) {
                const double K = map_coordinates(spec, 1.0, av.x[j]).K;
                f.u1[j] = sigma_near_upper_price(spec, K, delta_S, cfg);
            } else {
                const double K = map_coordinates(spec, 0.0, av.x[j]).K;
                const double guess = std::sqrt(2.0 * std::log(K / spec.F));
                f.u0[j] = solve_call(spec, K, z_floor, guess, cfg);
            }
        } catch (const Error& e) {
            throw annotate(e, upper ? "u=1" : "u=0", static_cast<std::ptrdiff_t>(j));
        }
    });

    f.v1[0] = f.u0[Nv];
    f.v1[Nu] = f.u1[Nv];
    detail::for_each_index(static_cast<std::ptrdiff_t>(Nu) - 1, parallel, [&](std::ptrdiff_t k) {
        const std::size_t i = 1 + static_cast<std::size_t>(k);
        try {
            const auto [K, Z] = map_coordinates(spec, au.x[i], 1.0);
            const double guess = K > spec.F ? sigma_asymptotic_large_strike(spec, K, Z) : 1.0;
            f.v1[i] = solve_call(spec, K, Z, guess, cfg);
        } catch (const Error& e) {
            throw annotate(e, "v=1", static_cast<std::ptrdiff_t>(i));
        }
    });
    return f;
}

}  // namespace ivsurf
