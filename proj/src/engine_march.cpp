// SPDX-License-Identifier: MIT
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "ivsurf/engine.hpp"
#include "parallel.hpp"

namespace ivsurf {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void propagate(std::vector<double>& w, const SplitOperators& ops, const Problem& p, double dT,
               const BoundaryFrame& frame) {
    if (p.cfg.propagator == Propagator::Unsplit) {
        unsplit_step(w, ops, p.grid, 0.5 * dT, 0.5 * dT, frame);
    } else {
        strang_step(w, ops, p.grid, dT, p.cfg, frame);
    }
}

AssembleOptions assemble_options(const SolverConfig& cfg) {
    AssembleOptions opt;
    opt.convection = cfg.convection;
    opt.allow_flat = !cfg.use_frames;
    opt.dirichlet = cfg.use_frames;
    opt.parallel = cfg.parallel;
    return opt;
}

}  // namespace

double relative_l2(const Grid& g, const std::vector<double>& a, const std::vector<double>& b, double u_max,
                   double v_max) {
    if (a.size() != g.size() || b.size() != g.size()) throw Error(ErrorCode::GridMismatch, "surface size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.nu(); ++i) {
        if (g.u.x[i] > u_max + 1e-12) continue;
        for (std::size_t j = 0; j < g.nv(); ++j) {
            if (g.v.x[j] > v_max + 1e-12) continue;
            const std::size_t p = g.idx(i, j);
            num += (a[p] - b[p]) * (a[p] - b[p]);
            den += a[p] * a[p];
        }
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

double definition_residual(const Problem& p, const Surface& s) {
    const DomainSpec spec = p.domain(s.T);
    double worst = 0.0;
    for (std::size_t node : p.probe) {
        const std::size_t i = node / p.grid.nv(), j = node % p.grid.nv();
        const auto [K, Z] = map_coordinates(spec, p.grid.u.x[i], p.grid.v.x[j]);
        const double V = bs_price(p.market, {K, s.T, Right::Call}, std::max(s.w[node], 0.0));
        worst = std::max(worst, std::abs(V - Z));
    }
    return worst;
}

Surface traditional_values(const Problem& p, double T, int* failures) {
    const Grid& g = p.grid;
    const std::size_t nu = g.nu(), nv = g.nv();
    const DomainSpec spec = p.domain(T);
    Surface s;
    s.T = T;
    s.frame = p.frame(T);
    s.w.assign(g.size(), 0.0);
    impose_frame(s.w, g, s.frame);

    const BoundaryPolicy policy{p.cfg.z_floor_rel, p.cfg.delta_S_rel};
    std::vector<char> ok(g.size(), 1);
    detail::for_each_index(static_cast<std::ptrdiff_t>(nu - 2), p.cfg.parallel, [&](std::ptrdiff_t k) {
        const std::size_t i = 1 + static_cast<std::size_t>(k);
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            const std::size_t n = g.idx(i, j);
            const auto [K, Z] = map_coordinates(spec, g.u.x[i], g.v.x[j]);
            try {
                s.w[n] = implied_total_vol(p.market, {K, T, Right::Call}, Z, RootConfig{}, policy);
            } catch (const Error&) {
                ok[n] = 0;
            }
        }
    });

    int failed = 0;
    for (std::size_t j = 1; j + 1 < nv; ++j) {
        for (std::size_t i = 1; i + 1 < nu; ++i) {
            if (ok[g.idx(i, j)]) continue;
            ++failed;
            std::size_t best = g.idx(i - 1, j);
            for (std::size_t d = 1; d < nu; ++d) {
                if (i + d < nu - 1 && ok[g.idx(i + d, j)]) {
                    best = g.idx(i + d, j);
                    break;
                }
                if (i >= d && ok[g.idx(i - d, j)]) {
                    best = g.idx(i - d, j);
                    break;
                }
            }
            s.w[g.idx(i, j)] = s.w[best];
        }
    }
    if (failures) *failures = failed;
    return s;
}

StepResult picard_advance(const Problem& p, const Surface& at_T, double dT, int step_index) {
    const auto t_start = Clock::now();
    const SolverConfig& cfg = p.cfg;
    const Grid& g = p.grid;
    const double T0 = at_T.T, T1 = T0 + dT;

    StepResult out;
    StepReport& rep = out.report;
    rep.step = step_index;
    rep.T = T1;

    auto t0 = Clock::now();
    BoundaryFrame frame1;
    if (cfg.use_frames) frame1 = p.frame(T1);
    rep.t_boundary = since(t0);

    const AssembleOptions opt = assemble_options(cfg);
    const DomainSpec spec0 = p.domain(T0), spec1 = p.domain(T1);
    t0 = Clock::now();
    const SplitOperators ops0 = assemble(at_T, T0, spec0, g, opt);
    rep.t_assemble += since(t0);

    Surface iterate{T1, at_T.w, frame1};
    for (int k = 1; k <= cfg.outer_max_iter; ++k) {
        std::vector<double> w = at_T.w;
        if (k == 1) {
            t0 = Clock::now();
            propagate(w, ops0, p, dT, frame1);
            rep.t_solve += since(t0);
        } else {
            t0 = Clock::now();
            const SplitOperators mid = average(ops0, assemble(iterate, T1, spec1, g, opt), g);
            rep.t_assemble += since(t0);
            t0 = Clock::now();
            propagate(w, mid, p, dT, frame1);
            rep.t_solve += since(t0);
        }
        rep.iterations = k;
        if (k >= 2) {
            const double change = relative_l2(g, w, iterate.w);
            rep.changes.push_back(change);
            iterate.w.swap(w);
            if (change <= cfg.outer_tol) {
                rep.converged = true;
                break;
            }
        } else {
            iterate.w.swap(w);
        }
    }
    out.surface = iterate;
    if (cfg.use_frames) rep.residual = definition_residual(p, iterate);
    rep.seconds = since(t_start);
    if (!rep.converged) {
        std::ostringstream os;
        os << "step " << step_index << " at T = " << T1 << ": change "
           << (rep.changes.empty() ? 0.0 : rep.changes.back()) << " after " << rep.iterations << " iterations";
        throw OuterNoConvergenceError(os.str(), out);
    }
    return out;
}

FirstStep first_step(const Problem& p, bool validate) {
    const auto t_start = Clock::now();
    const double dT = p.cfg.dT;
    FirstStep fs;
    int failed = 0;
    fs.result.surface = traditional_values(p, dT, &failed);
    StepReport& rep = fs.result.report;
    rep.step = 1;
    rep.T = dT;
    rep.converged = true;
    rep.residual = definition_residual(p, fs.result.surface);
    rep.seconds = since(t_start);
    if (!validate) return fs;

    // Implicit first-order iteration (I - dT L(w_prev)) w = w0 seeded with the traditional surface.
    std::vector<double> w0(p.grid.size(), 0.0);
    if (p.cfg.seed_origin == SeedOrigin::Limit) {
        // Total volatility at fixed (u, v) as T -> 0: the map freezes at D = Q = 1 and
        // with r = q = 0 the price depends on total volatility only.
        Problem p0 = p;
        p0.market.r = 0.0;
        p0.market.q = 0.0;
        w0 = traditional_values(p0, 1.0).w;
    }

    const DomainSpec spec = p.domain(dT);
    AssembleOptions opt = assemble_options(p.cfg);
    const BoundaryFrame& frame = fs.result.surface.frame;
    Surface iterate = fs.result.surface;
    const auto& tr = fs.result.surface.w;
    for (int k = 1; k <= p.cfg.first_step_iters; ++k) {
        const SplitOperators ops = assemble(iterate, dT, spec, p.grid, opt);
        std::vector<double> w = w0;
        unsplit_step(w, ops, p.grid, dT, 0.0, frame);
        iterate.w.swap(w);
        fs.validation_eps.push_back(relative_l2(p.grid, tr, iterate.w));
    }
    fs.validation_surface = iterate;
    return fs;
}

Trajectory solve_surface(const Problem& p) {
    Trajectory tr;
    FirstStep fs = first_step(p, false);
    tr.surfaces.push_back(fs.result.surface);
    tr.reports.push_back(fs.result.report);
    const int steps = static_cast<int>(std::llround(p.cfg.T_max / p.cfg.dT));
    for (int n = 2; n <= steps; ++n) {
        StepResult r = picard_advance(p, tr.surfaces.back(), p.cfg.dT, n);
        tr.surfaces.push_back(std::move(r.surface));
        tr.reports.push_back(std::move(r.report));
    }
    return tr;
}

}  // namespace ivsurf
