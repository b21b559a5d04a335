// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace ivsurf {

/// Strictly increasing nodes on [0, 1] with x[0] = 0 and x[N] = 1.
struct Axis {
    std::vector<double> x;

    std::size_t N() const { return x.size() - 1; }
    std::size_t size() const { return x.size(); }
    double h(std::size_t i) const { return x[i] - x[i - 1]; }
    double h_min() const;
    double h_max() const;
};

/// N + 1 nodes x = sinh(alpha xi) / sinh(alpha) on a uniform xi grid, with alpha
/// chosen so that h_max / h_min = Rc. Nodes are densest near 0.
/// Throws BadSpec for N < 4 or Rc < 1.
Axis build_axis(int N, double Rc);

/// Wraps explicit nodes; throws BadSpec unless they run strictly from 0 to 1.
Axis axis_from_nodes(std::vector<double> nodes);

/// Weights w such that sum_k w[k] f(pts[k]) approximates f^(deriv)(x0),
/// from the Taylor moment conditions on the given points.
std::vector<double> taylor_weights(const std::vector<double>& pts, double x0, int deriv);

using Weights3 = std::array<double, 3>;

/// Per-node finite-difference weights. Offsets of each triple:
///   central, second: (i-1, i, i+1)
///   backward2:       (i-2, i-1, i)      second order, valid for i >= 2
///   forward2:        (i, i+1, i+2)      second order, valid for i <= N-2
///   backward1:       (i-1, i)           first order, stored as (0, w_{i-1}, w_i)
///   forward1:        (i, i+1)           first order, stored as (w_i, w_{i+1}, 0)
/// Entries outside their valid range are NaN. At the two end nodes `central`
/// holds the one-sided second-order first-derivative weights (forward at 0,
/// backward at N) laid out like forward2 / backward2.
struct StencilSet {
    std::vector<Weights3> central;
    std::vector<Weights3> second;
    std::vector<Weights3> backward2;
    std::vector<Weights3> forward2;
    std::vector<Weights3> backward1;
    std::vector<Weights3> forward1;
};

StencilSet stencils(const Axis& axis);

/// Square banded matrix with kl sub- and ku super-diagonals (each at most 2).
/// Row i stores A(i, i + d) for d in [-kl, ku].
struct BandedOperator {
    int n = 0;
    int kl = 1;
    int ku = 1;
    std::vector<double> band;

    BandedOperator() = default;
    BandedOperator(int n_, int kl_, int ku_);

    static BandedOperator identity(int n);

    double& at(int i, int d) { return band[static_cast<std::size_t>(i) * (kl + ku + 1) + (d + kl)]; }
    double at(int i, int d) const { return band[static_cast<std::size_t>(i) * (kl + ku + 1) + (d + kl)]; }

    std::vector<double> multiply(const std::vector<double>& x) const;
    double max_abs() const;
};

/// Solves op x = rhs. Tridiagonal systems use Thomas elimination without pivoting;
/// purely lower (ku = 0) or upper (kl = 0) banded systems use substitution.
/// Throws Singular when a pivot magnitude falls below 1e-300.
std::vector<double> solve_banded(const BandedOperator& op, const std::vector<double>& rhs);

struct MetzlerReport {
    bool is_metzler;
    double worst_offdiag;  ///< most negative off-diagonal entry
    double worst_diag;     ///< largest diagonal entry
};

/// Metzler test with tolerance 1e-13 * max|entry|. `diag_exempt` is subtracted from
/// every diagonal entry before the test (used for the growth term of the split operators).
MetzlerReport metzler_check(const BandedOperator& op, double diag_exempt = 0.0);

}  // namespace ivsurf
