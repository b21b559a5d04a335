// SPDX-License-Identifier: MIT
#include "ivsurf/meshkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ivsurf/error.hpp"
#include "ivsurf/rootkit.hpp"

namespace ivsurf {

double Axis::h_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < x.size(); ++i) m = std::min(m, h(i));
    return m;
}

double Axis::h_max() const {
    double m = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, h(i));
    return m;
}

namespace {

std::vector<double> sinh_nodes(int N, double alpha) {
    std::vector<double> x(N + 1);
    for (int i = 0; i <= N; ++i) {
        const double xi = static_cast<double>(i) / N;
        x[i] = alpha == 0.0 ? xi : std::sinh(alpha * xi) / std::sinh(alpha);
    }
    x[0] = 0.0;
    x[N] = 1.0;
    return x;
}

double log_step_ratio(int N, double alpha) {
    const auto x = sinh_nodes(N, alpha);
    return std::log((x[N] - x[N - 1]) / (x[1] - x[0]));
}

}  // namespace

Axis build_axis(int N, double Rc) {
    if (N < 4) throw Error(ErrorCode::BadSpec, "axis needs N >= 4");
    if (!(Rc >= 1.0)) throw Error(ErrorCode::BadSpec, "compression ratio must be >= 1");
    if (Rc == 1.0) return Axis{sinh_nodes(N, 0.0)};

    const double target = std::log(Rc);
    double hi = 1.0;
    while (log_step_ratio(N, hi) < target) {
        hi *= 2.0;
        if (hi > 700.0) throw Error(ErrorCode::BadSpec, "compression ratio too large for this N");
    }
    RootConfig cfg{1e-14, 1e-15, 400};
    const double alpha = solve_root([&](double a) { return log_step_ratio(N, a) - target; }, {1e-12, hi}, cfg);
    return Axis{sinh_nodes(N, alpha)};
}

Axis axis_from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 3 || nodes.front() != 0.0 || nodes.back() != 1.0) {
        throw Error(ErrorCode::BadSpec, "axis nodes must run from 0 to 1");
    }
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (!(nodes[i] > nodes[i - 1])) throw Error(ErrorCode::BadSpec, "axis nodes must increase strictly");
    }
    return Axis{std::move(nodes)};
}

std::vector<double> taylor_weights(const std::vector<double>& pts, double x0, int deriv) {
    // Moment conditions sum_k w_k (p_k - x0)^m / m! = [m == deriv], m = 0..n-1,
    // solved by Gaussian elimination with partial pivoting.
    const std::size_t n = pts.size();
    std::vector<double> A(n * n);
    std::vector<double> b(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        double fact = 1.0;
        for (std::size_t j = 2; j <= m; ++j) fact *= static_cast<double>(j);
        for (std::size_t k = 0; k < n; ++k) A[m * n + k] = std::pow(pts[k] - x0, static_cast<double>(m)) / fact;
    }
    b[static_cast<std::size_t>(deriv)] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r * n + c]) > std::abs(A[p * n + c])) p = r;
        if (p != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(A[c * n + k], A[p * n + k]);
            std::swap(b[c], b[p]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r * n + c] / A[c * n + c];
            for (std::size_t k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> w(n);
    for (std::size_t c = n; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= A[c * n + k] * w[k];
        w[c] = s / A[c * n + c];
    }
    return w;
}

StencilSet stencils(const Axis& axis) {
    const std::size_t n = axis.size();
    const std::size_t N = axis.N();
    const auto& x = axis.x;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const Weights3 none{nan, nan, nan};

    auto tri = [&](std::size_t a, std::size_t b, std::size_t c, double x0, int d) {
        const auto w = taylor_weights({x[a], x[b], x[c]}, x0, d);
        return Weights3{w[0], w[1], w[2]};
    };

    StencilSet s;
    s.central.assign(n, none);
    s.second.assign(n, none);
    s.backward2.assign(n, none);
    s.forward2.assign(n, none);
    s.backward1.assign(n, none);
    s.forward1.assign(n, none);
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 1 && i + 1 <= N) {
            s.central[i] = tri(i - 1, i, i + 1, x[i], 1);
            s.second[i] = tri(i - 1, i, i + 1, x[i], 2);
        }
        if (i >= 2) s.backward2[i] = tri(i - 2, i - 1, i, x[i], 1);
        if (i + 2 <= N) s.forward2[i] = tri(i, i + 1, i + 2, x[i], 1);
        if (i >= 1) s.backward1[i] = Weights3{0.0, -1.0 / axis.h(i), 1.0 / axis.h(i)};
        if (i + 1 <= N) s.forward1[i] = Weights3{-1.0 / axis.h(i + 1), 1.0 / axis.h(i + 1), 0.0};
    }
    s.central[0] = s.forward2[0];
    s.central[N] = s.backward2[N];
    return s;
}

BandedOperator::BandedOperator(int n_, int kl_, int ku_) : n(n_), kl(kl_), ku(ku_) {
    if (n < 1 || kl < 0 || ku < 0 || kl > 2 || ku > 2) throw Error(ErrorCode::BadSpec, "unsupported band shape");
    band.assign(static_cast<std::size_t>(n) * (kl + ku + 1), 0.0);
}

BandedOperator BandedOperator::identity(int n) {
    BandedOperator op(n, 1, 1);
    for (int i = 0; i < n; ++i) op.at(i, 0) = 1.0;
    return op;
}

std::vector<double> BandedOperator::multiply(const std::vector<double>& x) const {
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int d = -kl; d <= ku; ++d) {
            const int j = i + d;
            if (j >= 0 && j < n) s += at(i, d) * x[j];
        }
        y[i] = s;
    }
    return y;
}

double BandedOperator::max_abs() const {
    double m = 0.0;
    for (double v : band) m = std::max(m, std::abs(v));
    return m;
}

namespace {

[[noreturn]] void singular(int row, double pivot) {
    std::ostringstream os;
    os << "pivot " << pivot << " at row " << row;
    throw Error(ErrorCode::Singular, os.str());
}

constexpr double kTinyPivot = 1e-300;

}  // namespace

std::vector<double> solve_banded(const BandedOperator& op, const std::vector<double>& rhs) {
    const int n = op.n;
    if (static_cast<int>(rhs.size()) != n) throw Error(ErrorCode::BadSpec, "rhs size mismatch");
    std::vector<double> x(rhs);

    if (op.ku == 0) {
        for (int i = 0; i < n; ++i) {
            double s = x[i];
            for (int d = -op.kl; d < 0; ++d)
                if (i + d >= 0) s -= op.at(i, d) * x[i + d];
            const double p = op.at(i, 0);
            if (std::abs(p) < kTinyPivot) singular(i, p);
            x[i] = s / p;
        }
        return x;
    }
    if (op.kl == 0) {
        for (int i = n - 1; i >= 0; --i) {
            double s = x[i];
            for (int d = 1; d <= op.ku; ++d)
                if (i + d < n) s -= op.at(i, d) * x[i + d];
            const double p = op.at(i, 0);
            if (std::abs(p) < kTinyPivot) singular(i, p);
            x[i] = s / p;
        }
        return x;
    }
    if (op.kl != 1 || op.ku != 1) throw Error(ErrorCode::BadSpec, "solve_banded handles tridiagonal or triangular bands");

    // Thomas elimination.
    std::vector<double> c(n, 0.0);
    double p = op.at(0, 0);
    if (std::abs(p) < kTinyPivot) singular(0, p);
    c[0] = n > 1 ? op.at(0, 1) / p : 0.0;
    x[0] /= p;
    for (int i = 1; i < n; ++i) {
        const double a = op.at(i, -1);
        p = op.at(i, 0) - a * c[i - 1];
        if (std::abs(p) < kTinyPivot) singular(i, p);
        c[i] = i + 1 < n ? op.at(i, 1) / p : 0.0;
        x[i] = (x[i] - a * x[i - 1]) / p;
    }
    for (int i = n - 2; i >= 0; --i) x[i] -= c[i] * x[i + 1];
    return x;
}

MetzlerReport metzler_check(const BandedOperator& op, double diag_exempt) {
    const double tol = 1e-13 * op.max_abs();
    MetzlerReport r{true, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int i = 0; i < op.n; ++i) {
        for (int d = -op.kl; d <= op.ku; ++d) {
            const int j = i + d;
            if (j < 0 || j >= op.n) continue;
            if (d == 0) {
                r.worst_diag = std::max(r.worst_diag, op.at(i, 0) - diag_exempt);
            } else {
                r.worst_offdiag = std::min(r.worst_offdiag, op.at(i, d));
            }
        }
    }
    if (r.worst_offdiag == std::numeric_limits<double>::infinity()) r.worst_offdiag = 0.0;
    r.is_metzler = r.worst_offdiag >= -tol && r.worst_diag <= tol;
    return r;
}

}  // namespace ivsurf
