// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>

namespace ivsurf {

/// Spot, short rate and continuous dividend yield, frozen for one surface build.
struct MarketParams {
    double S = 100.0;
    double r = 0.0;
    double q = 0.0;

    double discount(double T) const { return std::exp(-r * T); }
    double appreciation(double T) const { return std::exp(-q * T); }
    double forward(double T) const { return S * appreciation(T) / discount(T); }
};

enum class Right { Call, Put };

struct OptionKey {
    double K = 100.0;
    double T = 1.0;
    Right right = Right::Call;
};

struct Gaussian {
    double pdf;
    double cdf;
};

/// Standard normal density and distribution, cdf via erfc.
Gaussian gaussian(double x);

inline double norm_pdf(double x) {
    static constexpr double kInvSqrt2Pi = 0.3989422804014327;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Mills ratio R(x) = (1 - N(x)) / N'(x). Continued fraction above x = 1.
double mills_ratio(double x);

struct DValues {
    double d1;
    double d2;
};

/// d1 = ln(S Q_T / (K D_T)) / w + w / 2 and d2 = d1 - w, w the total volatility.
/// Throws Domain for w <= 0.
DValues d_values(const MarketParams& m, const OptionKey& key, double w);

/// Black-Scholes value in terms of total volatility w = sigma * sqrt(T).
/// At w = 0 returns the discounted intrinsic value.
double bs_price(const MarketParams& m, const OptionKey& key, double w);

/// Lower and upper no-arbitrage bounds of the option value.
struct PriceBounds {
    double lo;
    double hi;
};
PriceBounds price_bounds(const MarketParams& m, const OptionKey& key);

struct Greeks {
    double vega;     ///< dV/dsigma
    double delta_S;  ///< dV/dS
    double delta_K;  ///< dV/dK
    double theta;    ///< dV/dt at fixed sigma, calendar time (= -dV/dT)
};

/// Throws Domain for w <= 0.
Greeks greeks(const MarketParams& m, const OptionKey& key, double w);

}  // namespace ivsurf
