// SPDX-License-Identifier: MIT
#include <algorithm>
#include <cmath>
#include <sstream>
#include <limits>

#include "ivsurf/engine.hpp"
#include "parallel.hpp"
#include "stencil_ops.hpp"

namespace ivsurf {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

Grid Grid::make(int N_u, int N_v, double Rc) {
    Grid g;
    g.u = build_axis(N_u, Rc);
    g.v = build_axis(N_v, Rc);
    g.su = stencils(g.u);
    g.sv = stencils(g.v);
    return g;
}

void impose_frame(std::vector<double>& w, const Grid& g, const BoundaryFrame& f) {
    const std::size_t nu = g.nu(), nv = g.nv();
    for (std::size_t j = 0; j < nv; ++j) {
        w[g.idx(0, j)] = f.u0[j];
        w[g.idx(nu - 1, j)] = f.u1[j];
    }
    for (std::size_t i = 0; i < nu; ++i) {
        w[g.idx(i, 0)] = f.v0[i];
        w[g.idx(i, nv - 1)] = f.v1[i];
    }
}

void SolverConfig::validate() const {
    auto bad = [](const char* what) { throw Error(ErrorCode::Config, what); };
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) bad("tolerances must be positive");
    if (outer_max_iter < 1 || inner_max_iter < 1) bad("iteration limits must be >= 1");
    if (!(dT > 0.0)) bad("dT must be positive");
    if (!(T_max >= dT)) bad("T_max must be >= dT");
    if (!(rho < 0.0)) bad("rho must be negative");
    if (!(z_floor_rel > 0.0) || !(delta_S_rel > 0.0) || !(delta_S_rel < 1.0)) bad("z_floor and delta_S must be positive");
    if (first_step_iters < 1) bad("first_step_iters must be >= 1");
}

BoundaryFrame Problem::frame(double T) const {
    const DomainSpec d = domain(T);
    return boundary_frame(d, grid.u, grid.v, cfg.z_floor_rel * d.SQ(), cfg.delta_S_rel * market.S, cfg.parallel);
}

Problem Problem::make(const MarketParams& m, double K_max, int N_u, int N_v, double Rc, const SolverConfig& cfg,
                      int probe_size) {
    cfg.validate();
    if (!(m.S > 0.0)) throw Error(ErrorCode::Config, "spot must be positive");
    Problem p;
    p.market = m;
    p.K_max = K_max;
    p.cfg = cfg;
    p.grid = Grid::make(N_u, N_v, Rc);
    DomainSpec::make(m, K_max, cfg.dT);
    DomainSpec::make(m, K_max, cfg.T_max);

    // Evenly spread lattice of interior nodes.
    const std::size_t iu = p.grid.nu() - 2, iv = p.grid.nv() - 2;
    const std::size_t want = static_cast<std::size_t>(std::max(probe_size, 1));
    const std::size_t ni = std::min<std::size_t>(iu, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(want * 2.0)))));
    const std::size_t nj = std::min<std::size_t>(iv, (want + ni - 1) / ni);
    for (std::size_t a = 0; a < ni && p.probe.size() < want; ++a) {
        const std::size_t i = 1 + (ni > 1 ? a * (iu - 1) / (ni - 1) : iu / 2);
        for (std::size_t b = 0; b < nj && p.probe.size() < want; ++b) {
            const std::size_t j = 1 + (nj > 1 ? b * (iv - 1) / (nj - 1) : iv / 2);
            p.probe.push_back(p.grid.idx(i, j));
        }
    }
    return p;
}

SplitOperators assemble(const Surface& s, double T, const DomainSpec& spec, const Grid& g, const AssembleOptions& opt) {
    const std::size_t nu = g.nu(), nv = g.nv(), n = g.size();
    if (s.w.size() != n) throw Error(ErrorCode::GridMismatch, "surface does not match grid");

    SplitOperators ops;
    ops.T = T;
    ops.nu = nu;
    ops.nv = nv;
    ops.dirichlet = opt.dirichlet;
    ops.kill = 1.0 / (2.0 * T);
    for (auto* f : {&ops.Wu, &ops.Wv, &ops.K1, &ops.B, &ops.Fc, &ops.U, &ops.V, &ops.du, &ops.dv, &ops.duv, &ops.cu,
                    &ops.cv})
        f->assign(n, 0.0);

    const MarketParams& m = spec.market;
    const double SQ = spec.SQ();
    const double sqrtT = std::sqrt(T);
    const double moving_speed = (m.r - m.q) * spec.D * spec.c1 * spec.K_max;

    detail::for_each_index(static_cast<std::ptrdiff_t>(nu - 2), opt.parallel, [&](std::ptrdiff_t k) {
        const std::size_t i = 1 + static_cast<std::size_t>(k);
        const double u = g.u.x[i];
        const auto& cu_w = g.su.central[i];
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            const std::size_t p = g.idx(i, j);
            const double v = g.v.x[j];
            const auto& cv_w = g.sv.central[j];
            const double wl = s.w[g.idx(i - 1, j)], wr = s.w[g.idx(i + 1, j)];
            double Wu = cu_w[0] * wl + cu_w[1] * s.w[p] + cu_w[2] * wr;
            double Wv = cv_w[0] * s.w[p - 1] + cv_w[1] * s.w[p] + cv_w[2] * s.w[p + 1];
            // The weights cancel only to rounding, so a flat neighbourhood leaves a residue.
            const double mag = std::max({std::abs(wl), std::abs(wr), std::abs(s.w[p - 1]), std::abs(s.w[p]),
                                         std::abs(s.w[p + 1])});
            if (std::abs(Wu) <= 64.0 * kEps * mag * (std::abs(cu_w[0]) + std::abs(cu_w[1]) + std::abs(cu_w[2])))
                Wu = 0.0;
            if (std::abs(Wv) <= 64.0 * kEps * mag * (std::abs(cv_w[0]) + std::abs(cv_w[1]) + std::abs(cv_w[2])))
                Wv = 0.0;
            if (!opt.allow_flat && Wu == 0.0 && Wv == 0.0) {
                std::ostringstream os;
                os << "both gradients vanish at (u, v) = (" << u << ", " << v << ")";
                throw Error(ErrorCode::DegenerateGradient, os.str());
            }
            double den = spec.a * Wu + spec.c1 * Wv;
            if (std::abs(den) < 1e-12) den = std::copysign(1e-12, den);
            const double K1 = (spec.c1 * (1.0 - u) + spec.a * v) / den;
            const double W = s.w[p];
            const double G = W * W * K1 * K1 / (2.0 * T);

            ops.Wu[p] = Wu;
            ops.Wv[p] = Wv;
            ops.K1[p] = K1;
            ops.du[p] = G * Wv * Wv;
            ops.dv[p] = G * Wu * Wu;
            ops.duv[p] = -2.0 * G * Wu * Wv;
            ops.U[p] = W * K1 * Wu / sqrtT;
            ops.V[p] = W * K1 * Wv / sqrtT;
            ops.B[p] = SQ * (m.r * (1.0 - u) - m.q) * spec.c1;
            ops.Fc[p] = (m.r - m.q) * v + ops.B[p];
            if (opt.convection == ConvectionFrame::Static) {
                ops.cu[p] = m.q * u;
                ops.cv[p] = -ops.Fc[p];
            } else {
                ops.cu[p] = 0.0;
                ops.cv[p] = -moving_speed * v;
            }
        }
    });
    build_lines(ops, g);
    return ops;
}

SplitOperators average(const SplitOperators& a, const SplitOperators& b, const Grid& g) {
    if (a.nu != b.nu || a.nv != b.nv) throw Error(ErrorCode::GridMismatch, "averaging operators of different grids");
    SplitOperators r = b;
    r.Lu.clear();
    r.Lv.clear();
    auto mean = [](std::vector<double>& out, const std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = 0.5 * (x[k] + y[k]);
    };
    mean(r.Wu, a.Wu, b.Wu);
    mean(r.Wv, a.Wv, b.Wv);
    mean(r.K1, a.K1, b.K1);
    mean(r.B, a.B, b.B);
    mean(r.Fc, a.Fc, b.Fc);
    mean(r.U, a.U, b.U);
    mean(r.V, a.V, b.V);
    mean(r.du, a.du, b.du);
    mean(r.dv, a.dv, b.dv);
    mean(r.duv, a.duv, b.duv);
    mean(r.cu, a.cu, b.cu);
    mean(r.cv, a.cv, b.cv);
    r.kill = 0.5 * (a.kill + b.kill);
    r.T = 0.5 * (a.T + b.T);
    build_lines(r, g);
    return r;
}

void build_lines(SplitOperators& ops, const Grid& g) {
    const std::size_t nu = g.nu(), nv = g.nv();
    const double half_kill = 0.5 * ops.kill;
    const double edge_diag = ops.dirichlet ? 0.0 : half_kill;

    ops.Lu.assign(nv, BandedOperator(static_cast<int>(nu), 1, 1));
    for (std::size_t j = 0; j < nv; ++j) {
        BandedOperator& L = ops.Lu[j];
        const bool edge_line = j == 0 || j + 1 == nv;
        for (std::size_t i = 0; i < nu; ++i) {
            if (edge_line || i == 0 || i + 1 == nu) {
                L.at(static_cast<int>(i), 0) = edge_diag;
                continue;
            }
            const std::size_t p = g.idx(i, j);
            const Weights3 t = detail::diffusion_convection(ops.du[p], ops.cu[p], g.su, i);
            L.at(static_cast<int>(i), -1) = t[0];
            L.at(static_cast<int>(i), 0) = t[1] + half_kill;
            L.at(static_cast<int>(i), 1) = t[2];
        }
    }
    ops.Lv.assign(nu, BandedOperator(static_cast<int>(nv), 1, 1));
    for (std::size_t i = 0; i < nu; ++i) {
        BandedOperator& L = ops.Lv[i];
        const bool edge_line = i == 0 || i + 1 == nu;
        for (std::size_t j = 0; j < nv; ++j) {
            if (edge_line || j == 0 || j + 1 == nv) {
                L.at(static_cast<int>(j), 0) = edge_diag;
                continue;
            }
            const std::size_t p = g.idx(i, j);
            const Weights3 t = detail::diffusion_convection(ops.dv[p], ops.cv[p], g.sv, j);
            L.at(static_cast<int>(j), -1) = t[0];
            L.at(static_cast<int>(j), 0) = t[1] + half_kill;
            L.at(static_cast<int>(j), 1) = t[2];
        }
    }
}

}  // namespace ivsurf
