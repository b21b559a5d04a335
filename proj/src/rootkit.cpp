// SPDX-License-Identifier: MIT
#include "ivsurf/rootkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ivsurf/chart.hpp"
#include "ivsurf/error.hpp"

namespace ivsurf {

double solve_root(const std::function<FnEval(double)>& f, Bracket bracket, const RootConfig& cfg,
                  std::optional<double> guess) {
    double lo = bracket.lo;
    double hi = bracket.hi;
    const FnEval flo = f(lo);
    const FnEval fhi = f(hi);
    if (flo.f * fhi.f > 0.0) {
        std::ostringstream os;
        os << "f(" << lo << ") = " << flo.f << " and f(" << hi << ") = " << fhi.f;
        throw Error(ErrorCode::NoBracket, os.str());
    }
    if (flo.f == 0.0) return lo;
    if (fhi.f == 0.0) return hi;

    // Orient so that f(xl) < 0 < f(xh).
    double xl = flo.f < 0.0 ? lo : hi;
    double xh = flo.f < 0.0 ? hi : lo;

    double x = guess ? std::clamp(*guess, std::min(lo, hi), std::max(lo, hi)) : 0.5 * (lo + hi);
    double dx_old = std::abs(hi - lo);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const FnEval e = f(x);
        if (std::abs(e.f) <= cfg.abs_tol) return x;
        if (e.f < 0.0) xl = x; else xh = x;

        double x_new;
        const double a = std::min(xl, xh);
        const double b = std::max(xl, xh);
        const bool newton_ok = std::isfinite(e.df) && e.df != 0.0;
        double step = newton_ok ? e.f / e.df : 0.0;
        if (newton_ok && x - step > a && x - step < b && std::abs(2.0 * e.f) <= std::abs(dx_old * e.df)) {
            x_new = x - step;
        } else {
            x_new = 0.5 * (a + b);
        }
        dx_old = std::abs(x_new - x);
        x = x_new;
        const double scale = std::max(std::abs(x), std::numeric_limits<double>::min());
        if (dx_old <= cfg.rel_tol * scale || (b - a) <= cfg.rel_tol * scale) return x;
    }
    std::ostringstream os;
    os << "no convergence after " << cfg.max_iter << " iterations, last x = " << x;
    throw Error(ErrorCode::NoConvergence, os.str());
}

double solve_root(const std::function<double(double)>& f, Bracket bracket, const RootConfig& cfg) {
    auto wrapped = [&f](double x) { return FnEval{f(x), std::numeric_limits<double>::quiet_NaN()}; };
    return solve_root(wrapped, bracket, cfg);
}

namespace {

double solve_call_total_vol(const MarketParams& m, const OptionKey& key, double target, const RootConfig& cfg) {
    const double Q = m.appreciation(key.T);
    const double SQ = m.S * Q;
    auto fn = [&](double w) {
        if (w <= 0.0) return FnEval{bs_price(m, key, 0.0) - target, std::numeric_limits<double>::quiet_NaN()};
        const auto [d1, d2] = d_values(m, key, w);
        return FnEval{bs_price(m, key, w) - target, SQ * norm_pdf(d1)};
    };

    double lo = 1e-8;
    if (fn(lo).f >= 0.0) lo = 0.0;

    const double F = m.forward(key.T);
    const double asym = large_strike_formula(std::max(key.K, F), F, SQ, target);
    double hi = asym + 1.0;
    for (int k = 0; k < 60 && fn(hi).f < 0.0; ++k) hi *= 2.0;

    // Newton from the inflection point of w -> V(w) converges monotonically.
    const double w_infl = std::sqrt(2.0 * std::abs(std::log(F / key.K)));
    const double guess = std::clamp(w_infl, lo, hi);
    return solve_root(fn, {lo, hi}, cfg, guess);
}

}  // namespace

double implied_total_vol(const MarketParams& m, const OptionKey& key, double Z, const RootConfig& cfg,
                         const BoundaryPolicy& policy) {
    const PriceBounds b = price_bounds(m, key);
    const double tol = 1e-12 * m.S;
    if (Z < b.lo - tol || Z > b.hi + tol) {
        std::ostringstream os;
        os << "price " << Z << " outside [" << b.lo << ", " << b.hi << "] for K = " << key.K << ", T = " << key.T;
        throw Error(ErrorCode::OutOfBounds, os.str());
    }

    double target = Z;
    if (Z <= b.lo + tol) {
        if (b.lo > 0.0) return 0.0;
        target = policy.z_floor_rel * b.hi;
    } else if (Z >= b.hi - tol) {
        target = b.hi * (1.0 - policy.delta_S_rel);
        if (target <= b.lo) return 0.0;
    }

    // Puts are inverted through parity on the equivalent call.
    OptionKey call = key;
    call.right = Right::Call;
    if (key.right == Right::Put) {
        target += m.S * m.appreciation(key.T) - key.K * m.discount(key.T);
    }
    return solve_call_total_vol(m, call, target, cfg);
}

}  // namespace ivsurf
