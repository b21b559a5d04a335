// SPDX-License-Identifier: MIT
#include "ivsurf/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "ivsurf/error.hpp"

namespace ivsurf {

Gaussian gaussian(double x) { return {norm_pdf(x), norm_cdf(x)}; }

double mills_ratio(double x) {
    if (x <= 1.0) {
        // erfc keeps the numerator accurate; no cancellation on this branch.
        return 0.5 * std::erfc(x * M_SQRT1_2) / norm_pdf(x);
    }
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), evaluated bottom-up.
    const int depth = 40 + static_cast<int>(std::ceil(400.0 / (x * x)));
    double t = 0.0;
    for (int k = depth; k >= 1; --k) t = k / (x + t);
    return 1.0 / (x + t);
}

DValues d_values(const MarketParams& m, const OptionKey& key, double w) {
    if (!(w > 0.0)) throw Error(ErrorCode::Domain, "d_values needs positive total volatility");
    const double D = m.discount(key.T);
    const double Q = m.appreciation(key.T);
    const double d1 = std::log(m.S * Q / (key.K * D)) / w + 0.5 * w;
    return {d1, d1 - w};
}

PriceBounds price_bounds(const MarketParams& m, const OptionKey& key) {
    const double SQ = m.S * m.appreciation(key.T);
    const double KD = key.K * m.discount(key.T);
    if (key.right == Right::Call) return {std::max(SQ - KD, 0.0), SQ};
    return {std::max(KD - SQ, 0.0), KD};
}

double bs_price(const MarketParams& m, const OptionKey& key, double w) {
    if (w < 0.0) throw Error(ErrorCode::Domain, "negative total volatility");
    const double SQ = m.S * m.appreciation(key.T);
    const double KD = key.K * m.discount(key.T);
    if (w == 0.0) return price_bounds(m, key).lo;
    const auto [d1, d2] = d_values(m, key, w);
    if (key.right == Right::Call) return SQ * norm_cdf(d1) - KD * norm_cdf(d2);
    return KD * norm_cdf(-d2) - SQ * norm_cdf(-d1);
}

Greeks greeks(const MarketParams& m, const OptionKey& key, double w) {
    const auto [d1, d2] = d_values(m, key, w);
    const double T = key.T;
    const double D = m.discount(T);
    const double Q = m.appreciation(T);
    const double sqrtT = std::sqrt(T);
    const double sigma = w / sqrtT;
    const double nd1 = norm_pdf(d1);

    Greeks g{};
    g.vega = m.S * Q * nd1 * sqrtT;
    // Common diffusion part of dV/dT; identical for calls and puts.
    const double decay = m.S * Q * nd1 * sigma / (2.0 * sqrtT);
    if (key.right == Right::Call) {
        g.delta_S = Q * norm_cdf(d1);
        g.delta_K = -D * norm_cdf(d2);
        const double dVdT = decay - m.q * m.S * Q * norm_cdf(d1) + m.r * key.K * D * norm_cdf(d2);
        g.theta = -dVdT;
    } else {
        g.delta_S = -Q * norm_cdf(-d1);
        g.delta_K = D * norm_cdf(-d2);
        const double dVdT = decay + m.q * m.S * Q * norm_cdf(-d1) - m.r * key.K * D * norm_cdf(-d2);
        g.theta = -dVdT;
    }
    return g;
}

}  // namespace ivsurf
