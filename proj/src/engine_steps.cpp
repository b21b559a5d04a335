// SPDX-License-Identifier: MIT
#include <algorithm>
#include <cmath>
#include <sstream>

#include "ivsurf/engine.hpp"
#include "parallel.hpp"

extern "C" void dgbsv_(const int* n, const int* kl, const int* ku, const int* nrhs, double* ab, const int* ldab,
                       int* ipiv, double* b, const int* ldb, int* info);

namespace ivsurf {

namespace {

double l2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

double frame_value(const BoundaryFrame& f, const Grid& g, std::size_t i, std::size_t j) {
    if (j == 0) return f.v0[i];
    if (j + 1 == g.nv()) return f.v1[i];
    if (i == 0) return f.u0[j];
    return f.u1[j];
}

}  // namespace

void cn_fractional_step(const std::vector<BandedOperator>& family, Direction dir, std::vector<double>& w,
                        const Grid& g, double dT, bool half, const BoundaryFrame& frame, bool parallel) {
    const double c = half ? 0.25 * dT : 0.5 * dT;
    const bool dirichlet = !frame.u0.empty();
    const std::size_t lines = dir == Direction::U ? g.nv() : g.nu();
    const std::size_t len = dir == Direction::U ? g.nu() : g.nv();
    if (family.size() != lines) throw Error(ErrorCode::GridMismatch, "operator family does not match grid");

    auto at = [&](std::size_t line, std::size_t k) -> double& {
        return dir == Direction::U ? w[g.idx(k, line)] : w[g.idx(line, k)];
    };

    detail::for_each_index(static_cast<std::ptrdiff_t>(lines), parallel, [&](std::ptrdiff_t l) {
        const std::size_t line = static_cast<std::size_t>(l);
        if (dirichlet && (line == 0 || line + 1 == lines)) return;
        const BandedOperator& L = family[line];
        std::vector<double> y(len);
        for (std::size_t k = 0; k < len; ++k) y[k] = at(line, k);
        std::vector<double> rhs = L.multiply(y);
        BandedOperator A(static_cast<int>(len), 1, 1);
        for (std::size_t k = 0; k < len; ++k) {
            rhs[k] = y[k] + c * rhs[k];
            for (int d = -1; d <= 1; ++d) A.at(static_cast<int>(k), d) = -c * L.at(static_cast<int>(k), d);
            A.at(static_cast<int>(k), 0) += 1.0;
        }
        if (dirichlet) {
            for (std::size_t k : {std::size_t{0}, len - 1}) {
                A.at(static_cast<int>(k), -1) = 0.0;
                A.at(static_cast<int>(k), 0) = 1.0;
                A.at(static_cast<int>(k), 1) = 0.0;
                rhs[k] = dir == Direction::U ? frame_value(frame, g, k, line) : frame_value(frame, g, line, k);
            }
        }
        std::vector<double> x;
        try {
            x = solve_banded(A, rhs);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "line " << line << ": " << e.what();
            throw Error(e.code(), os.str());
        }
        for (std::size_t k = 0; k < len; ++k) at(line, k) = x[k];
    });
    if (dirichlet) impose_frame(w, g, frame);
}

MixedReport mixed_step(std::vector<double>& w, const SplitOperators& ops, const Grid& g, double dT,
                       const SolverConfig& cfg, const BoundaryFrame& frame) {
    const std::size_t nu = g.nu(), nv = g.nv();
    const bool dirichlet = !frame.u0.empty();
    const double rho = cfg.rho;
    if (!(rho < 0.0)) throw Error(ErrorCode::BadSpec, "mixed step needs rho < 0");
    // A full Crank-Nicolson step weights the operator by dT/2 on each side;
    // the factorisation produces -tau * rho * U * V, hence tau = dT / (-2 rho).
    const double tau = dT / (-2.0 * rho);
    const double sq = std::sqrt(tau);

    // Inner coefficient depends on v only so that the u-difference commutes with it.
    std::vector<double> Vt(nv, 0.0), Ut(g.size(), 0.0);
    for (std::size_t j = 1; j + 1 < nv; ++j)
        for (std::size_t i = 1; i + 1 < nu; ++i) Vt[j] = std::max(Vt[j], std::abs(ops.V[g.idx(i, j)]));
    double beta = 0.0;
    for (std::size_t i = 1; i + 1 < nu; ++i)
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            const std::size_t p = g.idx(i, j);
            Ut[p] = Vt[j] > 0.0 ? -ops.duv[p] / Vt[j] : 0.0;
            if (cfg.beta_policy == BetaPolicy::Bounds) {
                beta = std::max(beta, Vt[j] + std::abs(rho) * std::abs(Ut[p]));
            } else {
                beta = std::max(beta, ops.U[p] - rho * ops.U[p]);
            }
        }
    if (cfg.beta_policy == BetaPolicy::Bounds) beta *= 1.5 * 1.1;

    MixedReport rep;
    rep.beta = beta;
    const std::vector<double> w_old = w;
    if (dirichlet) impose_frame(w, g, frame);
    bool any = false;
    for (double d : ops.duv) any = any || d != 0.0;
    if (!any || !(beta > 0.0)) return rep;

    const double P = beta * sq / g.u.h_min();
    const double Q = beta * sq / g.v.h_min();
    rep.P = P;
    rep.Q = Q;

    // Sbar = (1 + dT/2 L_uv) S with the central 9-point product stencil.
    // The explicit half reads the old edge values.
    std::vector<double> Sbar = w;
    for (std::size_t i = 1; i + 1 < nu; ++i) {
        const auto& a = g.su.central[i];
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            const auto& b = g.sv.central[j];
            double cross = 0.0;
            for (int da = -1; da <= 1; ++da)
                for (int db = -1; db <= 1; ++db) cross += a[da + 1] * b[db + 1] * w_old[g.idx(i + da, j + db)];
            Sbar[g.idx(i, j)] = w_old[g.idx(i, j)] + 0.5 * dT * ops.duv[g.idx(i, j)] * cross;
        }
    }

    // Rows next to an edge have no second-order backward (k = 1) or forward (k = len - 2) stencil.
    // There both sides use backward1, so the explicit and implicit differences cancel at the fixed point.
    auto edge_row = [](std::size_t k, std::size_t len) { return k < 2 || k + 2 >= len; };
    auto bwd = [&](const StencilSet& s, std::size_t k, std::size_t len) -> Weights3 {
        return edge_row(k, len) ? s.backward1[k] : s.backward2[k];
    };
    // Explicit first difference at node k of a line; at(m) reads node m.
    auto explicit_diff = [&](const StencilSet& s, std::size_t k, std::size_t len, auto&& at) {
        if (edge_row(k, len)) return s.backward1[k][1] * at(k - 1) + s.backward1[k][2] * at(k);
        const Weights3& f = cfg.mixed_scheme == MixedScheme::B ? s.forward2[k] : s.forward1[k];
        return f[0] * at(k) + f[1] * at(k + 1) + (f[2] != 0.0 ? f[2] * at(k + 2) : 0.0);
    };

    // The factorisation is (P + a A^B_u)(Q + b A^B_v) with b = sq Vt a function of v only, so the
    // u-sweep runs first and its i = 0 column is (Q + b A^B_v) S evaluated on the edge.
    auto bv_apply = [&](const std::vector<double>& x, std::size_t i, std::size_t j) {
        const Weights3 bv = bwd(g.sv, j, nv);
        const std::size_t p = g.idx(i, j);
        return bv[2] * x[p] + bv[1] * x[p - 1] + (j >= 2 ? bv[0] * x[p - 2] : 0.0);
    };
    std::vector<double> S = Sbar, Snext = Sbar, Y(g.size(), 0.0);
    for (int it = 1; it <= cfg.inner_max_iter; ++it) {
        // u-sweep: (P - sq rho Ut A^B_u) Y = Sbar + [(PQ - 1) - Q sq rho Ut A^F_u + P sq Vt A^F_v] S
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            Y[g.idx(0, j)] = Q * S[g.idx(0, j)] + sq * Vt[j] * bv_apply(S, 0, j);
            for (std::size_t i = 1; i + 1 < nu; ++i) {
                const std::size_t p = g.idx(i, j);
                const double du_f = explicit_diff(g.su, i, nu, [&](std::size_t m) { return S[g.idx(m, j)]; });
                const double dv_f = explicit_diff(g.sv, j, nv, [&](std::size_t m) { return S[g.idx(i, m)]; });
                const double r = Sbar[p] + (P * Q - 1.0) * S[p] - Q * sq * rho * Ut[p] * du_f + P * sq * Vt[j] * dv_f;
                const Weights3 bu = bwd(g.su, i, nu);
                const double off = bu[1] * Y[g.idx(i - 1, j)] + (i >= 2 ? bu[0] * Y[g.idx(i - 2, j)] : 0.0);
                const double coef = -sq * rho * Ut[p];
                Y[p] = (r - coef * off) / (P + coef * bu[2]);
            }
        }
        // v-sweep: (Q + sq Vt A^B_v) S_next = Y, with S_next(i, 0) taken from the current edge.
        for (std::size_t i = 1; i + 1 < nu; ++i) {
            for (std::size_t j = 1; j + 1 < nv; ++j) {
                const std::size_t p = g.idx(i, j);
                const Weights3 bv = bwd(g.sv, j, nv);
                const double off = bv[1] * Snext[p - 1] + (j >= 2 ? bv[0] * Snext[p - 2] : 0.0);
                Snext[p] = (Y[p] - sq * Vt[j] * off) / (Q + sq * Vt[j] * bv[2]);
            }
        }
        const double change = l2_diff(Snext, S) / std::max(l2(Snext), 1e-300);
        S = Snext;
        rep.iterations = it;
        rep.last_change = change;
        if (change <= cfg.inner_tol) {
            w = S;
            if (dirichlet) impose_frame(w, g, frame);
            return rep;
        }
    }
    std::ostringstream os;
    os << "mixed step: change " << rep.last_change << " after " << cfg.inner_max_iter << " iterations (PQ = " << P * Q
       << ")";
    throw Error(ErrorCode::InnerNoConvergence, os.str());
}

void strang_step(std::vector<double>& w, const SplitOperators& ops, const Grid& g, double dT, const SolverConfig& cfg,
                 const BoundaryFrame& frame) {
    cn_fractional_step(ops.Lu, Direction::U, w, g, dT, true, frame, cfg.parallel);
    cn_fractional_step(ops.Lv, Direction::V, w, g, dT, true, frame, cfg.parallel);
    mixed_step(w, ops, g, dT, cfg, frame);
    cn_fractional_step(ops.Lv, Direction::V, w, g, dT, true, frame, cfg.parallel);
    cn_fractional_step(ops.Lu, Direction::U, w, g, dT, true, frame, cfg.parallel);
}

void unsplit_step(std::vector<double>& w, const SplitOperators& ops, const Grid& g, double ci, double ce,
                  const BoundaryFrame& frame) {
    const std::size_t nu = g.nu(), nv = g.nv();
    const std::size_t mu = nu - 2, mv = nv - 2;
    const bool dirichlet = !frame.u0.empty();

    std::vector<double> next = w;
    if (dirichlet) {
        impose_frame(next, g, frame);
    } else {
        const double growth = (1.0 + ce * ops.kill) / (1.0 - ci * ops.kill);
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nv; ++j)
                if (g.on_edge(i, j)) next[g.idx(i, j)] *= growth;
    }

    const int n = static_cast<int>(mu * mv);
    const int kl = static_cast<int>(mv) + 1, ku = kl;
    const int ldab = 2 * kl + ku + 1;
    std::vector<double> ab(static_cast<std::size_t>(ldab) * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    auto unknown = [&](std::size_t i, std::size_t j) { return static_cast<int>((i - 1) * mv + (j - 1)); };

    for (std::size_t i = 1; i + 1 < nu; ++i) {
        const auto& a = g.su.central[i];
        for (std::size_t j = 1; j + 1 < nv; ++j) {
            const std::size_t p = g.idx(i, j);
            const auto& b = g.sv.central[j];
            double L[3][3] = {};
            for (int da = -1; da <= 1; ++da)
                for (int db = -1; db <= 1; ++db) L[da + 1][db + 1] = ops.duv[p] * a[da + 1] * b[db + 1];
            const BandedOperator& Lu = ops.Lu[j];
            const BandedOperator& Lv = ops.Lv[i];
            L[0][1] += Lu.at(static_cast<int>(i), -1);
            L[2][1] += Lu.at(static_cast<int>(i), 1);
            L[1][0] += Lv.at(static_cast<int>(j), -1);
            L[1][2] += Lv.at(static_cast<int>(j), 1);
            L[1][1] += Lu.at(static_cast<int>(i), 0) + Lv.at(static_cast<int>(j), 0);

            const int row = unknown(i, j);
            double r = w[p];
            for (int da = -1; da <= 1; ++da) {
                for (int db = -1; db <= 1; ++db) {
                    const double c = L[da + 1][db + 1];
                    if (c == 0.0) continue;
                    const std::size_t ii = i + da, jj = j + db;
                    r += ce * c * w[g.idx(ii, jj)];
                    if (g.on_edge(ii, jj)) {
                        r += ci * c * next[g.idx(ii, jj)];
                    } else {
                        const int col = unknown(ii, jj);
                        ab[static_cast<std::size_t>(kl + ku + row - col) + static_cast<std::size_t>(col) * ldab] +=
                            -ci * c;
                    }
                }
            }
            ab[static_cast<std::size_t>(kl + ku) + static_cast<std::size_t>(row) * ldab] += 1.0;
            rhs[row] = r;
        }
    }

    std::vector<int> ipiv(n);
    const int nrhs = 1;
    int info = 0;
    dgbsv_(&n, &kl, &ku, &nrhs, ab.data(), &ldab, ipiv.data(), rhs.data(), &n, &info);
    if (info != 0) {
        std::ostringstream os;
        os << "banded LU failed, info = " << info;
        throw Error(ErrorCode::Singular, os.str());
    }
    for (std::size_t i = 1; i + 1 < nu; ++i)
        for (std::size_t j = 1; j + 1 < nv; ++j) next[g.idx(i, j)] = rhs[unknown(i, j)];
    w.swap(next);
}

}  // namespace ivsurf
