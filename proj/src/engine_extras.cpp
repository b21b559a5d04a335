// SPDX-License-Identifier: MIT
#include <algorithm>
#include <cmath>
#include <sstream>

#include "ivsurf/engine.hpp"
#include "parallel.hpp"

namespace ivsurf {

double theta_total_vol(const MarketParams& m, const OptionKey& key, double w) {
    const auto [d1, d2] = d_values(m, key, w);
    const double SQ = m.S * m.appreciation(key.T);
    const double KD = key.K * m.discount(key.T);
    if (key.right == Right::Call) return -m.q * SQ * norm_cdf(d1) + m.r * KD * norm_cdf(d2);
    return m.q * SQ * norm_cdf(-d1) - m.r * KD * norm_cdf(-d2);
}

std::vector<double> hyperbolic_step_1d(const std::vector<double>& line, const std::vector<double>& Z, double K,
                                       double T, double dT, const MarketParams& m, double inflow) {
    const std::size_t n = line.size();
    if (n != Z.size() || n < 2) throw Error(ErrorCode::GridMismatch, "line and Z nodes differ in size");
    if (!(T > 0.0) || !(dT > 0.0)) throw Error(ErrorCode::Domain, "hyperbolic step needs T > 0 and dT > 0");
    double h = Z[1] - Z[0];
    for (std::size_t k = 1; k < n; ++k) h = std::min(h, Z[k] - Z[k - 1]);
    if (!(h > 0.0)) throw Error(ErrorCode::BadSpec, "Z nodes must increase");

    const double left0 = line[0];
    std::vector<double> w = line, c(n), next(n);
    double t = T;
    long substeps = 0;
    while (t < T + dT - 1e-14 * (T + dT)) {
        double cmax = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            // Maturity derivative at fixed sigma, i.e. minus the calendar theta.
            c[k] = w[k] > 0.0 ? -greeks(m, {K, t, Right::Call}, w[k]).theta : 0.0;
            cmax = std::max(cmax, std::abs(c[k]));
        }
        const double remaining = T + dT - t;
        double dt = remaining;
        if (cmax > 0.0) dt = std::min(dt, 0.9 * h / cmax);
        if (++substeps > 1000000) throw Error(ErrorCode::CflExploded, "more than 1e6 sub-steps");
        for (std::size_t k = 0; k < n; ++k) {
            double grad = 0.0;
            if (c[k] > 0.0 && k > 0) {
                grad = (w[k] - w[k - 1]) / (Z[k] - Z[k - 1]);
            } else if (c[k] < 0.0 && k + 1 < n) {
                grad = (w[k + 1] - w[k]) / (Z[k + 1] - Z[k]);
            }
            next[k] = w[k] - dt * c[k] * grad;
        }
        const double growth = std::sqrt((t + dt) / t);
        t += dt;
        for (std::size_t k = 0; k < n; ++k) w[k] = std::max(next[k], 0.0) * growth;
        if (c[0] > 0.0) w[0] = left0 + (inflow - left0) * (t - T) / dT;
    }
    return w;
}

TaylorResult taylor_update(const Problem& p, const Surface& at_T, double dT) {
    const Grid& g = p.grid;
    const double T0 = at_T.T, T1 = T0 + dT;
    const DomainSpec s0 = p.domain(T0), s1 = p.domain(T1);
    TaylorResult out;
    out.surface.T = T1;
    out.surface.w = at_T.w;
    if (p.cfg.use_frames) out.surface.frame = p.frame(T1);

    std::vector<char> clamped(g.size(), 0);
    detail::for_each_index(static_cast<std::ptrdiff_t>(g.nu() - 2), p.cfg.parallel, [&](std::ptrdiff_t k) {
        const std::size_t i = 1 + static_cast<std::size_t>(k);
        for (std::size_t j = 1; j + 1 < g.nv(); ++j) {
            const std::size_t n = g.idx(i, j);
            const double w = at_T.w[n];
            if (!(w > 0.0)) continue;
            const auto a = map_coordinates(s0, g.u.x[i], g.v.x[j]);
            const auto b = map_coordinates(s1, g.u.x[i], g.v.x[j]);
            const OptionKey key{a.K, T0, Right::Call};
            const Greeks gr = greeks(p.market, key, w);
            const double dVdw = gr.vega / std::sqrt(T0);
            // A node of fixed (u, v) moves in (K, Z) as D_T and Q_T drift.
            const double dw = ((b.Z - a.Z) - theta_total_vol(p.market, key, w) * dT - gr.delta_K * (b.K - a.K)) / dVdw;
            if (dw < -w) {
                out.surface.w[n] = 0.0;
                clamped[n] = 1;
            } else {
                out.surface.w[n] = w + dw;
            }
        }
    });
    out.clamped = static_cast<int>(std::count(clamped.begin(), clamped.end(), 1));
    if (out.surface.has_frame()) impose_frame(out.surface.w, g, out.surface.frame);
    return out;
}

double laplacian_norm(std::size_t n, double h) {
    const double s = std::sin(static_cast<double>(n) * M_PI / (2.0 * static_cast<double>(n + 1)));
    return 4.0 / (h * h) * s * s;
}

StabilityReport stability_report(const Problem& p, const Surface& s, double dT) {
    const Grid& g = p.grid;
    AssembleOptions opt;
    opt.convection = p.cfg.convection;
    opt.allow_flat = true;
    opt.dirichlet = s.has_frame();
    opt.parallel = p.cfg.parallel;
    const SplitOperators ops = assemble(s, s.T, p.domain(s.T), g, opt);

    StabilityReport r;
    const std::size_t mu = g.nu() - 2, mv = g.nv() - 2;
    const double hu = g.u.h_min(), hv = g.v.h_min(), h = std::min(hu, hv);
    r.norm_du2 = laplacian_norm(mu, hu);
    r.norm_duv = 4.0 / (hu * hv) * std::sin(mu * M_PI / (2.0 * (mu + 1))) * std::sin(mv * M_PI / (2.0 * (mv + 1)));
    for (std::size_t i = 1; i + 1 < g.nu(); ++i)
        for (std::size_t j = 1; j + 1 < g.nv(); ++j) {
            const std::size_t n = g.idx(i, j);
            r.d_coeff = std::max({r.d_coeff, ops.du[n], ops.dv[n]});
        }
    r.degenerate = r.d_coeff == 0.0;
    r.ratio = 2.0 * r.d_coeff * dT / (h * h);
    r.satisfied = r.ratio > 1.0;
    return r;
}

}  // namespace ivsurf
