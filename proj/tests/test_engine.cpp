// SPDX-License-Identifier: MIT
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "ivsurf/engine.hpp"

using namespace ivsurf;

namespace {

const MarketParams kMarket{100.0, 0.05, 0.01};

SolverConfig harness_config(Propagator prop, double dT) {
    SolverConfig c;
    c.use_frames = false;
    c.propagator = prop;
    c.dT = dT;
    c.T_max = 1.0;
    c.outer_tol = 1e-12;
    return c;
}

Surface flat(const Grid& g, double T, double value) {
    Surface s;
    s.T = T;
    s.w.assign(g.size(), value);
    return s;
}

/// Harness march of a flat surface from T0 to T1; returns max |w - c sqrt(T1)|.
double sqrt_t_error(Propagator prop, double dT, double T0, double T1) {
    const MarketParams zero{100.0, 0.0, 0.0};
    const Problem p = Problem::make(zero, 400.0, 12, 10, 5.0, harness_config(prop, dT));
    const double c = 0.3;
    Surface s = flat(p.grid, T0, c * std::sqrt(T0));
    const int steps = static_cast<int>(std::llround((T1 - T0) / dT));
    for (int n = 0; n < steps; ++n) s = picard_advance(p, s, dT, n + 2).surface;
    double err = 0.0;
    for (double w : s.w) err = std::max(err, std::abs(w - c * std::sqrt(T1)));
    return err;
}

SplitOperators constant_mixed(const Grid& g, double U, double V) {
    SplitOperators ops;
    ops.nu = g.nu();
    ops.nv = g.nv();
    ops.T = 1.0;
    for (auto* f : {&ops.Wu, &ops.Wv, &ops.K1, &ops.B, &ops.Fc, &ops.du, &ops.dv, &ops.cu, &ops.cv}) f->assign(g.size(), 0.0);
    ops.U.assign(g.size(), U);
    ops.V.assign(g.size(), V);
    ops.duv.assign(g.size(), -U * V);
    return ops;
}

BoundaryFrame frame_of(const Grid& g, const std::vector<double>& w) {
    BoundaryFrame f;
    for (std::size_t j = 0; j < g.nv(); ++j) {
        f.u0.push_back(w[g.idx(0, j)]);
        f.u1.push_back(w[g.idx(g.nu() - 1, j)]);
    }
    for (std::size_t i = 0; i < g.nu(); ++i) {
        f.v0.push_back(w[g.idx(i, 0)]);
        f.v1.push_back(w[g.idx(i, g.nv() - 1)]);
    }
    return f;
}

struct MarketFixture {
    SolverConfig cfg;
    Problem p;
    Surface tr;
    MarketFixture(double T, int Nu = 60, int Nv = 30) {
        cfg.T_max = std::max(T, cfg.dT);
        p = Problem::make(kMarket, 400.0, Nu, Nv, 20.0, cfg);
        tr = traditional_values(p, T);
    }
};

}  // namespace

TEST_CASE("flat surface assembles to the pure growth operator") {
    const Grid g = Grid::make(10, 8, 5.0);
    const DomainSpec spec = DomainSpec::make({100.0, 0.0, 0.0}, 400.0, 0.5);
    AssembleOptions opt;
    opt.allow_flat = true;
    opt.dirichlet = false;
    const SplitOperators ops = assemble(flat(g, 0.5, 0.2), 0.5, spec, g, opt);
    for (const auto* fam : {&ops.Lu, &ops.Lv})
        for (const BandedOperator& L : *fam)
            for (int i = 0; i < L.n; ++i) {
                CHECK(L.at(i, 0) == doctest::Approx(1.0 / (4.0 * 0.5)));
                CHECK(L.at(i, -1) == 0.0);
                CHECK(L.at(i, 1) == 0.0);
            }
    opt.allow_flat = false;
    try {
        assemble(flat(g, 0.5, 0.2), 0.5, spec, g, opt);
        FAIL("expected DegenerateGradient");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateGradient);
    }
}

TEST_CASE("traditional surface gives non-negative U, V and Metzler lines") {
    MarketFixture fx(0.5, 100, 50);
    const SplitOperators ops = assemble(fx.tr, 0.5, fx.p.domain(0.5), fx.p.grid);
    const Grid& g = fx.p.grid;
    for (std::size_t i = 1; i + 1 < g.nu(); ++i)
        for (std::size_t j = 1; j + 1 < g.nv(); ++j) {
            CHECK(ops.U[g.idx(i, j)] >= 0.0);
            CHECK(ops.V[g.idx(i, j)] >= 0.0);
        }
    for (const auto* fam : {&ops.Lu, &ops.Lv})
        for (const BandedOperator& L : *fam) CHECK(metzler_check(L, 0.5 * ops.kill).is_metzler);
}

TEST_CASE("crank-nicolson fractional step") {
    const Grid g = Grid::make(8, 6, 5.0);
    std::vector<double> w(g.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = 1.0 + 0.1 * static_cast<double>(k % 7);
    const std::vector<double> w0 = w;

    std::vector<BandedOperator> zero(g.nv(), BandedOperator(static_cast<int>(g.nu()), 1, 1));
    cn_fractional_step(zero, Direction::U, w, g, 0.01, true, {});
    CHECK(w == w0);

    const double T = 0.2, dT = 0.01;
    std::vector<BandedOperator> kill(g.nu(), BandedOperator(static_cast<int>(g.nv()), 1, 1));
    for (auto& L : kill)
        for (int i = 0; i < L.n; ++i) L.at(i, 0) = 1.0 / (4.0 * T);
    cn_fractional_step(kill, Direction::V, w, g, dT, true, {});
    const double x = dT / (16.0 * T);
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(w[k] == doctest::Approx(w0[k] * (1 + x) / (1 - x)).epsilon(1e-14));
    CHECK(std::abs((1 + x) / (1 - x) - std::exp(dT / (8.0 * T))) < 10 * x * x * x);

    // Frame values survive any step.
    const BoundaryFrame f = frame_of(g, w0);
    w = w0;
    std::vector<BandedOperator> kill_u(g.nv(), BandedOperator(static_cast<int>(g.nu()), 1, 1));
    for (auto& L : kill_u)
        for (int i = 0; i < L.n; ++i) L.at(i, 0) = 1.0 / (4.0 * T);
    cn_fractional_step(kill_u, Direction::U, w, g, dT, false, f);
    for (std::size_t j = 0; j < g.nv(); ++j) CHECK(w[g.idx(0, j)] == w0[g.idx(0, j)]);
}

TEST_CASE("mixed step without cross coefficient is the identity") {
    const Grid g = Grid::make(10, 8, 5.0);
    std::vector<double> w(g.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::sin(0.3 * static_cast<double>(k));
    const std::vector<double> w0 = w;
    SolverConfig cfg;
    const MixedReport r = mixed_step(w, constant_mixed(g, 0.0, 1.0), g, 0.01, cfg, frame_of(g, w0));
    CHECK(r.iterations == 0);
    CHECK(w == w0);
}

TEST_CASE("mixed step is exact on a bilinear field") {
    const Grid g = Grid::make(16, 12, 5.0);
    const double U = 0.7, V = 0.9, dT = 0.02;
    std::vector<double> w(g.size()), exact(g.size());
    for (std::size_t i = 0; i < g.nu(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j) {
            w[g.idx(i, j)] = 1.0 + g.u.x[i] * g.v.x[j];
            // w_T = duv w_uv with w_uv = 1 grows linearly, so Crank-Nicolson is exact.
            exact[g.idx(i, j)] = w[g.idx(i, j)] - dT * U * V;
        }
    for (MixedScheme scheme : {MixedScheme::A, MixedScheme::B}) {
        SolverConfig cfg;
        cfg.mixed_scheme = scheme;
        cfg.inner_tol = 1e-14;
        cfg.inner_max_iter = 100000;
        std::vector<double> x = w;
        mixed_step(x, constant_mixed(g, U, V), g, dT, cfg, frame_of(g, exact));
        double err = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) err = std::max(err, std::abs(x[k] - exact[k]));
        CHECK(err < 1e-8);
    }
}

namespace {

/// w = 1 + u^2 v^2 under w_T = c w_uv: the exact solution is quadratic in T, so CN with exact stencils reproduces it.
double quartic_error(MixedScheme scheme, int N, int* iterations) {
    const Grid g = Grid::make(N, N, 1.0);
    const double U = 1.0, V = 0.8, c = -U * V, dT = 0.05;
    std::vector<double> w(g.size()), exact(g.size());
    for (std::size_t i = 0; i < g.nu(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j) {
            const double u = g.u.x[i], v = g.v.x[j];
            w[g.idx(i, j)] = 1.0 + u * u * v * v;
            exact[g.idx(i, j)] = w[g.idx(i, j)] + 4.0 * c * dT * u * v + 2.0 * c * c * dT * dT;
        }
    SolverConfig cfg;
    cfg.mixed_scheme = scheme;
    cfg.inner_tol = 1e-13;
    cfg.inner_max_iter = 100000;
    *iterations = mixed_step(w, constant_mixed(g, U, V), g, dT, cfg, frame_of(g, exact)).iterations;
    double err = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) err = std::max(err, std::abs(w[k] - exact[k]));
    return err;
}

/// Largest modulus of the interior inner-iteration symbol on a uniform grid with constant coefficients.
double inner_symbol_radius(MixedScheme scheme, double h) {
    using cd = std::complex<double>;
    const double rho = -0.25, dT = 0.05, U = 1.0, V = 0.8;
    const double tau = dT / (-2.0 * rho), sq = std::sqrt(tau);
    const double beta = 1.65 * (V + std::abs(rho) * U);
    const double P = beta * sq / h, Q = P, a = -sq * rho * U, b = sq * V;
    auto e = [](double t, int k) { return std::exp(cd(0.0, k * t)); };
    auto back2 = [&](double t) { return (3.0 - 4.0 * e(t, -1) + e(t, -2)) / (2.0 * h); };
    auto fwd = [&](double t) {
        return scheme == MixedScheme::B ? (-3.0 + 4.0 * e(t, 1) - e(t, 2)) / (2.0 * h) : (e(t, 1) - 1.0) / h;
    };
    double worst = 0.0;
    const double pi = std::acos(-1.0);
    for (int m = 0; m <= 200; ++m)
        for (int n = 0; n <= 200; ++n) {
            const double t1 = 2.0 * pi * m / 200, t2 = 2.0 * pi * n / 200;
            const cd M = (P + a * back2(t1)) * (Q + b * back2(t2));
            const cd Nn = P * Q - 1.0 + Q * a * fwd(t1) + P * b * fwd(t2);
            worst = std::max(worst, std::abs(Nn / M));
        }
    return worst;
}

}  // namespace

TEST_CASE("mixed step: scheme A contracts under refinement, scheme B is sharper where it converges") {
    int it8 = 0, it16 = 0, it32 = 0, itB = 0;
    const double a8 = quartic_error(MixedScheme::A, 8, &it8);
    quartic_error(MixedScheme::A, 16, &it16);
    quartic_error(MixedScheme::A, 32, &it32);
    // Contraction slows like N^2 but does not stop.
    CHECK(it16 > it8);
    CHECK(it32 > it16);
    const double b8 = quartic_error(MixedScheme::B, 8, &itB);
    CAPTURE(a8);
    CAPTURE(b8);
    CHECK(b8 < 0.5 * a8);

    CHECK(inner_symbol_radius(MixedScheme::A, 1.0 / 64) < 1.0);
    CHECK(inner_symbol_radius(MixedScheme::B, 1.0 / 8) < 1.0);
    CHECK(inner_symbol_radius(MixedScheme::B, 1.0 / 32) > 1.0);
}

TEST_CASE("mixed step keeps a traditional surface non-negative") {
    MarketFixture fx(0.5);
    const SplitOperators ops = assemble(fx.tr, 0.5, fx.p.domain(0.5), fx.p.grid);
    for (MixedScheme scheme : {MixedScheme::A, MixedScheme::B}) {
        SolverConfig cfg;
        cfg.mixed_scheme = scheme;
        std::vector<double> w = fx.tr.w;
        mixed_step(w, ops, fx.p.grid, 1e-4, cfg, fx.tr.frame);
        CHECK(*std::min_element(w.begin(), w.end()) >= 0.0);
    }
}

TEST_CASE("flat harness follows c sqrt(T) at second order") {
    for (Propagator prop : {Propagator::Unsplit, Propagator::Strang}) {
        const double e1 = sqrt_t_error(prop, 0.02, 0.1, 0.5);
        const double e2 = sqrt_t_error(prop, 0.01, 0.1, 0.5);
        const double e3 = sqrt_t_error(prop, 0.005, 0.1, 0.5);
        CHECK(std::log2(e1 / e2) >= 1.8);
        CHECK(std::log2(e2 / e3) >= 1.8);
    }
}

TEST_CASE("picard iteration on a flat surface settles once the operator is averaged") {
    const MarketParams zero{100.0, 0.0, 0.0};
    const Problem p = Problem::make(zero, 400.0, 12, 10, 5.0, harness_config(Propagator::Unsplit, 0.01));
    const StepResult r = picard_advance(p, flat(p.grid, 0.2, 0.1), 0.01, 2);
    // Iterate 1 uses 1/(2T) at T only; iterate 2 averages it with T + dT; iterate 3 repeats iterate 2.
    CHECK(r.report.iterations == 3);
    REQUIRE(r.report.changes.size() == 2);
    CHECK(r.report.changes.front() > 1e-6);
    CHECK(r.report.changes.back() <= 1e-14);
    CHECK(r.report.converged);
    const double k = 0.5 * (1.0 / 0.4 + 1.0 / 0.42), x = 0.005 * k;
    for (double w : r.surface.w) CHECK(w == doctest::Approx(0.1 * (1 + x) / (1 - x)).epsilon(1e-13));
}

TEST_CASE("picard steps on reference market parameters contract and stay non-negative") {
    SolverConfig cfg;
    cfg.T_max = 0.05;
    const Problem p = Problem::make(kMarket, 400.0, 60, 30, 20.0, cfg);
    Surface s = first_step(p).result.surface;
    for (int n = 2; n <= 5; ++n) {
        const StepResult r = picard_advance(p, s, cfg.dT, n);
        CHECK(r.report.converged);
        CHECK(r.report.iterations <= cfg.outer_max_iter);
        for (std::size_t k = 2; k < r.report.changes.size(); ++k)
            CHECK(r.report.changes[k] <= 0.9 * r.report.changes[k - 1]);
        s = r.surface;
        CHECK(*std::min_element(s.w.begin(), s.w.end()) >= 0.0);
        for (std::size_t i = 0; i < p.grid.nu(); ++i) CHECK(s.w[p.grid.idx(i, 0)] == 0.0);
    }
}

TEST_CASE("outer iteration limit raises with the last iterate") {
    SolverConfig cfg;
    cfg.T_max = 0.05;
    cfg.outer_max_iter = 2;
    cfg.outer_tol = 1e-15;
    const Problem p = Problem::make(kMarket, 400.0, 30, 16, 20.0, cfg);
    const Surface s = first_step(p).result.surface;
    try {
        picard_advance(p, s, cfg.dT, 2);
        FAIL("expected OuterNoConvergence");
    } catch (const OuterNoConvergenceError& e) {
        CHECK(e.code() == ErrorCode::OuterNoConvergence);
        CHECK(e.last().report.iterations == 2);
        CHECK(e.last().surface.w.size() == p.grid.size());
    }
}

TEST_CASE("first step reproduces prices and the zero line") {
    SolverConfig cfg;
    const Problem p = Problem::make(kMarket, 400.0, 40, 20, 20.0, cfg);
    const FirstStep fs = first_step(p, true);
    const Surface& s = fs.result.surface;
    const DomainSpec spec = p.domain(cfg.dT);
    for (std::size_t i = 0; i < p.grid.nu(); ++i) CHECK(s.w[p.grid.idx(i, 0)] == 0.0);
    for (std::size_t i = 1; i + 1 < p.grid.nu(); ++i)
        for (std::size_t j = 1; j + 1 < p.grid.nv(); ++j) {
            const auto [K, Z] = map_coordinates(spec, p.grid.u.x[i], p.grid.v.x[j]);
            CHECK(std::abs(bs_price(kMarket, {K, cfg.dT, Right::Call}, s.w[p.grid.idx(i, j)]) - Z) <= 1e-9 * spec.SQ());
        }
    CHECK(fs.validation_eps.size() == static_cast<std::size_t>(cfg.first_step_iters));
    for (double e : fs.validation_eps) CHECK(std::isfinite(e));
}

TEST_CASE("hyperbolic step") {
    const MarketParams zero{100.0, 0.0, 0.0};
    std::vector<double> Z(20);
    for (std::size_t k = 0; k < Z.size(); ++k) Z[k] = 1.0 + 4.0 * static_cast<double>(k);
    // A flat line has no transport, only growth.
    const std::vector<double> line(Z.size(), 0.25);
    const std::vector<double> out = hyperbolic_step_1d(line, Z, 110.0, 0.5, 0.01, zero, 0.25 * std::sqrt(0.51 / 0.5));
    for (double w : out) CHECK(w == doctest::Approx(0.25 * std::sqrt(0.51 / 0.5)).epsilon(1e-12));

    // Calls with r = q = 0 lose value with calendar time, so transport runs towards larger Z.
    for (double w : {0.05, 0.2, 0.8}) CHECK(-greeks(zero, {110.0, 0.5, Right::Call}, w).theta > 0.0);

    std::vector<double> tight(5);
    for (std::size_t k = 0; k < tight.size(); ++k) tight[k] = 50.0 + 1e-9 * static_cast<double>(k);
    const std::vector<double> steep{0.1, 0.2, 0.3, 0.4, 0.5};
    try {
        hyperbolic_step_1d(steep, tight, 100.0, 0.5, 0.5, zero, 0.1);
        FAIL("expected CflExploded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CflExploded);
    }
}

TEST_CASE("hyperbolic lines track the traditional values near the money") {
    SolverConfig cfg;
    cfg.T_max = 0.11;
    const Problem p = Problem::make(kMarket, 400.0, 100, 50, 20.0, cfg);
    const double K = p.domain(cfg.T_max).F * 1.001;
    const DomainSpec top = p.domain(cfg.T_max);
    std::vector<double> Z;
    for (std::size_t i = 1; i + 1 < p.grid.nu(); ++i)
        if (p.grid.u.x[i] <= 0.8) Z.push_back(top.SQ() * p.grid.u.x[i]);
    auto reference = [&](double T) {
        std::vector<double> w;
        for (double z : Z) w.push_back(implied_total_vol(kMarket, {K, T, Right::Call}, z));
        return w;
    };
    std::vector<double> line = reference(cfg.dT);
    double T = cfg.dT;
    for (int n = 0; n < 10; ++n) {
        const double inflow = implied_total_vol(kMarket, {K, T + cfg.dT, Right::Call}, Z[0]);
        line = hyperbolic_step_1d(line, Z, K, T, cfg.dT, kMarket, inflow);
        T += cfg.dT;
    }
    const std::vector<double> ref = reference(T);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        num += (line[k] - ref[k]) * (line[k] - ref[k]);
        den += ref[k] * ref[k];
    }
    CHECK(std::sqrt(num / den) <= 0.01);
}

TEST_CASE("total-volatility theta against a finite difference") {
    const MarketParams m{100.0, 0.05, 0.01};
    for (Right right : {Right::Call, Right::Put}) {
        const OptionKey key{120.0, 0.7, right};
        const double w = 0.25, h = 1e-5;
        OptionKey up = key, dn = key;
        up.T += h;
        dn.T -= h;
        const double fd = (bs_price(m, up, w) - bs_price(m, dn, w)) / (2 * h);
        CHECK(theta_total_vol(m, key, w) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("taylor update") {
    SUBCASE("zero rates leave the surface in place") {
        SolverConfig cfg;
        const Problem p = Problem::make({100.0, 0.0, 0.0}, 400.0, 30, 16, 20.0, cfg);
        const Surface s = traditional_values(p, 0.2);
        const TaylorResult r = taylor_update(p, s, 0.01);
        CHECK(r.clamped == 0);
        for (std::size_t i = 1; i + 1 < p.grid.nu(); ++i)
            for (std::size_t j = 1; j + 1 < p.grid.nv(); ++j)
                CHECK(r.surface.w[p.grid.idx(i, j)] == doctest::Approx(s.w[p.grid.idx(i, j)]).epsilon(1e-12));
    }
    SUBCASE("second-order local error under step halving") {
        SolverConfig cfg;
        const Problem p = Problem::make(kMarket, 400.0, 30, 16, 20.0, cfg);
        const Surface s = traditional_values(p, 0.2);
        auto err = [&](double dT) {
            const Surface next = taylor_update(p, s, dT).surface;
            const Surface ref = traditional_values(p, 0.2 + dT);
            double m = 0.0;
            for (std::size_t i = 1; i + 1 < p.grid.nu(); ++i)
                for (std::size_t j = 1; j + 1 < p.grid.nv(); ++j) {
                    const std::size_t n = p.grid.idx(i, j);
                    m = std::max(m, std::abs(next.w[n] - ref.w[n]));
                }
            return m;
        };
        const double e1 = err(0.02), e2 = err(0.01), e3 = err(0.005);
        CHECK(std::log2(e1 / e2) >= 1.8);
        CHECK(std::log2(e2 / e3) >= 1.8);
    }
    SUBCASE("repeated steps lose accuracy") {
        SolverConfig cfg;
        const Problem p = Problem::make(kMarket, 400.0, 30, 16, 20.0, cfg);
        Surface s = traditional_values(p, 0.1);
        double prev = 0.0;
        for (int n = 1; n <= 5; ++n) {
            s = taylor_update(p, s, 0.02).surface;
            const double e = relative_l2(p.grid, traditional_values(p, s.T).w, s.w);
            CHECK(e >= prev);
            prev = e;
        }
    }
}

TEST_CASE("stability diagnostic") {
    CHECK(laplacian_norm(3, 0.25) == doctest::Approx(4.0 / 0.0625 * std::pow(std::sin(3.0 * M_PI / 8.0), 2)));
    const MarketParams zero{100.0, 0.0, 0.0};
    const Problem flat_p = Problem::make(zero, 400.0, 12, 10, 5.0, harness_config(Propagator::Unsplit, 0.01));
    const StabilityReport flat_r = stability_report(flat_p, flat(flat_p.grid, 0.3, 0.2), 0.01);
    CHECK(flat_r.degenerate);
    CHECK(flat_r.ratio == 0.0);
    CHECK_FALSE(flat_r.satisfied);

    MarketFixture fx(0.05, 100, 50);
    const StabilityReport r = stability_report(fx.p, fx.tr, 0.01);
    CHECK_FALSE(r.degenerate);
    CHECK(r.satisfied);
}

TEST_CASE("relative l2 norm") {
    const Grid g = Grid::make(6, 5, 2.0);
    std::vector<double> a(g.size(), 2.0), b = a;
    CHECK(relative_l2(g, a, b) == 0.0);
    for (double& x : b) x *= 1.0 + 1e-4;
    CHECK(relative_l2(g, a, b) == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK_THROWS_AS(relative_l2(g, a, std::vector<double>(3)), Error);
}
