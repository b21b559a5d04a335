// SPDX-License-Identifier: MIT
// Serial reference vs OpenMP kernels: wall time per call and bitwise agreement.
#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ivsurf/engine.hpp"

using namespace ivsurf;

namespace {

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != b[k]) m = std::max(m, std::isnan(a[k] - b[k]) ? INFINITY : std::abs(a[k] - b[k]));
    }
    return m;
}

std::vector<double> flatten(const BoundaryFrame& f) {
    std::vector<double> out;
    for (const auto* e : {&f.u0, &f.u1, &f.v0, &f.v1}) out.insert(out.end(), e->begin(), e->end());
    return out;
}

std::vector<double> flatten(const SplitOperators& ops) {
    std::vector<double> out;
    for (const auto* e : {&ops.du, &ops.dv, &ops.duv, &ops.cu, &ops.cv, &ops.U, &ops.V}) out.insert(out.end(), e->begin(), e->end());
    return out;
}

/// Best-of-reps seconds for one call.
double time_best(int reps, const std::function<void()>& fn) {
    double best = INFINITY;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial vs parallel kernel benchmark"};
    int N_u = 100, N_v = 50, reps = 3;
    double T = 0.1;
    app.add_option("--nu", N_u, "grid intervals along u")->check(CLI::Range(4, 4000));
    app.add_option("--nv", N_v, "grid intervals along v")->check(CLI::Range(4, 4000));
    app.add_option("--reps", reps, "repetitions per kernel (best time reported)")->check(CLI::Range(1, 1000));
    app.add_option("--maturity", T, "maturity of the benchmarked surface")->check(CLI::Range(0.02, 5.0));
    CLI11_PARSE(app, argc, argv);

    const MarketParams m{100.0, 0.05, 0.01};
    SolverConfig cfg;
    cfg.T_max = T + 1.0;
    Problem par = Problem::make(m, 400.0, N_u, N_v, 20.0, cfg);
    Problem ser = par;
    ser.cfg.parallel = false;
    const Grid& g = par.grid;
    const DomainSpec spec = par.domain(T);
    const double z_floor = cfg.z_floor_rel * spec.SQ(), dS = cfg.delta_S_rel * m.S;

    std::printf("grid %dx%d, %d OpenMP threads, best of %d\n", N_u, N_v, omp_get_max_threads(), reps);
    std::printf("%-20s %12s %12s %8s %12s\n", "kernel", "serial [s]", "parallel [s]", "ratio", "max |diff|");
    bool identical = true;
    auto row = [&](const char* name, double ts, double tp, double diff) {
        std::printf("%-20s %12.5f %12.5f %8.2f %12.3e\n", name, ts, tp, ts / tp, diff);
        identical = identical && diff == 0.0;
    };

    {
        BoundaryFrame a, b;
        const double ts = time_best(reps, [&] { a = boundary_frame(spec, g.u, g.v, z_floor, dS, false); });
        const double tp = time_best(reps, [&] { b = boundary_frame(spec, g.u, g.v, z_floor, dS, true); });
        row("boundary_frame", ts, tp, max_diff(flatten(a), flatten(b)));
    }
    Surface surf_s, surf_p;
    {
        const double ts = time_best(reps, [&] { surf_s = traditional_values(ser, T); });
        const double tp = time_best(reps, [&] { surf_p = traditional_values(par, T); });
        row("traditional_values", ts, tp, max_diff(surf_s.w, surf_p.w));
    }
    SplitOperators ops_s, ops_p;
    {
        AssembleOptions os, op;
        os.parallel = false;
        const double ts = time_best(reps, [&] { ops_s = assemble(surf_s, T, spec, g, os); });
        const double tp = time_best(reps, [&] { ops_p = assemble(surf_s, T, spec, g, op); });
        row("assemble", ts, tp, max_diff(flatten(ops_s), flatten(ops_p)));
    }
    {
        std::vector<double> a, b;
        const double ts = time_best(reps, [&] {
            a = surf_s.w;
            cn_fractional_step(ops_s.Lu, Direction::U, a, g, cfg.dT, true, surf_s.frame, false);
            cn_fractional_step(ops_s.Lv, Direction::V, a, g, cfg.dT, true, surf_s.frame, false);
        });
        const double tp = time_best(reps, [&] {
            b = surf_s.w;
            cn_fractional_step(ops_s.Lu, Direction::U, b, g, cfg.dT, true, surf_s.frame, true);
            cn_fractional_step(ops_s.Lv, Direction::V, b, g, cfg.dT, true, surf_s.frame, true);
        });
        row("cn line sweeps", ts, tp, max_diff(a, b));
    }
    {
        StepResult a, b;
        const double ts = time_best(reps, [&] { a = picard_advance(ser, surf_s, cfg.dT, 2); });
        const double tp = time_best(reps, [&] { b = picard_advance(par, surf_s, cfg.dT, 2); });
        row("picard_advance", ts, tp, max_diff(a.surface.w, b.surface.w));
    }

    std::printf("%s\n", identical ? "parallel results identical to serial" : "MISMATCH between serial and parallel");
    return identical ? 0 : 1;
}
