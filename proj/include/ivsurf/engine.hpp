// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ivsurf/analytics.hpp"
#include "ivsurf/chart.hpp"
#include "ivsurf/error.hpp"
#include "ivsurf/meshkit.hpp"

namespace ivsurf {

/// Tensor grid on the unit square. Node (i, j) sits at (u_i, v_j) and is stored
/// at i * nv() + j, i.e. row-major over (u, v).
struct Grid {
    Axis u;
    Axis v;
    StencilSet su;
    StencilSet sv;

    std::size_t nu() const { return u.size(); }
    std::size_t nv() const { return v.size(); }
    std::size_t size() const { return nu() * nv(); }
    std::size_t idx(std::size_t i, std::size_t j) const { return i * nv() + j; }
    bool on_edge(std::size_t i, std::size_t j) const { return i == 0 || j == 0 || i + 1 == nu() || j + 1 == nv(); }

    static Grid make(int N_u, int N_v, double Rc);
};

/// Total implied volatility on the grid at maturity T. Edge values equal `frame`
/// (an empty frame marks harness runs without Dirichlet data).
struct Surface {
    double T = 0.0;
    std::vector<double> w;
    BoundaryFrame frame;

    bool has_frame() const { return !frame.u0.empty(); }
};

void impose_frame(std::vector<double>& w, const Grid& grid, const BoundaryFrame& frame);

enum class MixedScheme { A, B };
enum class BetaPolicy { Bounds, Coefficient };
enum class Propagator { Unsplit, Strang };
/// Convection terms of the operator in (u, v). `Moving` accounts for the drift of the
/// (K, Z) -> (u, v) map with T through D_T and Q_T; `Static` keeps the map frozen.
enum class ConvectionFrame { Moving, Static };
/// State at T = 0 used by the first-step validation iteration.
enum class SeedOrigin { Limit, Zero };

struct SolverConfig {
    double outer_tol = 1e-6;
    int outer_max_iter = 20;
    double inner_tol = 1e-10;
    int inner_max_iter = 20000;
    double dT = 0.01;
    double T_max = 1.0;
    MixedScheme mixed_scheme = MixedScheme::A;
    BetaPolicy beta_policy = BetaPolicy::Bounds;
    double rho = -0.25;
    double z_floor_rel = 1e-10;   ///< z_floor = z_floor_rel * S * Q_T
    double delta_S_rel = 1e-3;    ///< delta_S = delta_S_rel * S
    Propagator propagator = Propagator::Unsplit;
    ConvectionFrame convection = ConvectionFrame::Moving;
    int first_step_iters = 20;
    SeedOrigin seed_origin = SeedOrigin::Limit;
    bool use_frames = true;       ///< false: harness mode, edges evolve with the growth term only
    bool parallel = true;

    void validate() const;
};

/// Everything a march needs besides the state.
struct Problem {
    MarketParams market;
    double K_max = 400.0;
    Grid grid;
    SolverConfig cfg;
    std::vector<std::size_t> probe;  ///< node indices used for the definition residual

    DomainSpec domain(double T) const { return DomainSpec::make(market, K_max, T); }
    BoundaryFrame frame(double T) const;

    static Problem make(const MarketParams& m, double K_max, int N_u, int N_v, double Rc, const SolverConfig& cfg,
                        int probe_size = 50);
};

/// Frozen coefficients of
///   L W = du W_uu + dv W_vv + duv W_uv + cu W_u + cv W_v + kill W
/// plus the directional line operators used by the split scheme.
struct SplitOperators {
    double T = 0.0;
    std::size_t nu = 0, nv = 0;
    std::vector<double> Wu, Wv, K1, B, Fc, U, V;
    std::vector<double> du, dv, duv, cu, cv;
    double kill = 0.0;
    bool dirichlet = true;
    std::vector<BandedOperator> Lu;  ///< along u, one per v index (size nv)
    std::vector<BandedOperator> Lv;  ///< along v, one per u index (size nu)
};

struct AssembleOptions {
    ConvectionFrame convection = ConvectionFrame::Moving;
    bool allow_flat = false;  ///< accept zero-gradient interior nodes (harness runs)
    bool dirichlet = true;
    bool parallel = true;
};

/// Throws DegenerateGradient at an interior node where both gradients vanish,
/// unless allow_flat is set.
SplitOperators assemble(const Surface& surface, double T, const DomainSpec& spec, const Grid& grid,
                        const AssembleOptions& opt = {});

/// Coefficient-wise mean of two assemblies on the same grid; line operators rebuilt.
SplitOperators average(const SplitOperators& a, const SplitOperators& b, const Grid& grid);

/// Rebuilds Lu and Lv from the coefficient fields.
void build_lines(SplitOperators& ops, const Grid& grid);

enum class Direction { U, V };

/// Crank-Nicolson step (1 - c L) x = (1 + c L) y on every line of one family,
/// c = dT/4 for a half step and dT/2 for a full step. Edge values of `frame`
/// are re-imposed afterwards when it is non-empty.
void cn_fractional_step(const std::vector<BandedOperator>& family, Direction dir, std::vector<double>& w,
                        const Grid& grid, double dT, bool half, const BoundaryFrame& frame, bool parallel = true);

struct MixedReport {
    int iterations = 0;
    double beta = 0.0;
    double P = 0.0;
    double Q = 0.0;
    double last_change = 0.0;
};

/// Full-step mixed-derivative stage by the factored two-sweep iteration.
/// Throws InnerNoConvergence.
MixedReport mixed_step(std::vector<double>& w, const SplitOperators& ops, const Grid& grid, double dT,
                       const SolverConfig& cfg, const BoundaryFrame& frame);

/// Symmetric sequence u(1/2), v(1/2), uv(1), v(1/2), u(1/2).
void strang_step(std::vector<double>& w, const SplitOperators& ops, const Grid& grid, double dT,
                 const SolverConfig& cfg, const BoundaryFrame& frame);

/// Solves (I - ci L) x = w_old + ce L w_old on the interior with one banded LU,
/// edges taken from `frame` (or advanced by the growth term when it is empty).
void unsplit_step(std::vector<double>& w, const SplitOperators& ops, const Grid& grid, double ci, double ce,
                  const BoundaryFrame& frame);

struct StepReport {
    int step = 0;
    double T = 0.0;
    int iterations = 0;
    std::vector<double> changes;
    double residual = 0.0;  ///< max |V(K, w) - Z| over the probe set
    double seconds = 0.0;
    double t_assemble = 0.0;
    double t_solve = 0.0;
    double t_boundary = 0.0;
    bool converged = false;
};

struct StepResult {
    Surface surface;
    StepReport report;
};

/// Raised when the outer iteration runs out; carries the last iterate.
class OuterNoConvergenceError : public Error {
public:
    OuterNoConvergenceError(const std::string& what, StepResult last)
        : Error(ErrorCode::OuterNoConvergence, what), last_(std::move(last)) {}
    const StepResult& last() const { return last_; }

private:
    StepResult last_;
};

/// Max |V(K, w) - Z| over the probe nodes.
double definition_residual(const Problem& p, const Surface& s);

/// One time step by Picard iteration on the averaged operator.
StepResult picard_advance(const Problem& p, const Surface& at_T, double dT, int step_index = 0);

/// Per-node inversion of the grid prices at maturity T. Interior nodes are
/// root-solved; edges come from the boundary frame. Nodes whose solve fails are
/// filled from the nearest solved neighbour along u and counted in `failures`.
Surface traditional_values(const Problem& p, double T, int* failures = nullptr);

struct FirstStep {
    StepResult result;
    std::vector<double> validation_eps;  ///< per-iteration error of the validation run
    Surface validation_surface;
};

/// Surface at T = dT from the traditional inversion. With `validate`, additionally
/// runs the first-order iteration (w - w0)/dT = L(w_prev) w seeded with it.
FirstStep first_step(const Problem& p, bool validate = false);

struct Trajectory {
    std::vector<Surface> surfaces;
    std::vector<StepReport> reports;
};

/// First step then Picard steps up to T_max.
Trajectory solve_surface(const Problem& p);

/// Explicit upwind step of w_T + c w_Z = w / (2T) along a line of fixed strike,
/// with transport speed c = -Theta (calendar theta at sigma = w / sqrt(T)).
/// `Z` are the line nodes; `inflow` is the value at Z[0] at T + dT.
/// Throws CflExploded if more than 1e6 sub-steps are needed.
std::vector<double> hyperbolic_step_1d(const std::vector<double>& line, const std::vector<double>& Z, double K,
                                       double T, double dT, const MarketParams& m, double inflow);

/// dV/dT at fixed total volatility (maturity direction).
double theta_total_vol(const MarketParams& m, const OptionKey& key, double w);

struct TaylorResult {
    Surface surface;
    int clamped = 0;
};

/// Nodewise first-order update w += -theta_total_vol / (dV/dw) * dT, edges from the new frame.
TaylorResult taylor_update(const Problem& p, const Surface& at_T, double dT);

struct StabilityReport {
    double norm_du2 = 0.0;
    double norm_duv = 0.0;
    double d_coeff = 0.0;
    double ratio = 0.0;
    bool satisfied = false;
    bool degenerate = false;
};

/// Largest eigenvalue magnitude of the uniform 3-point Laplacian of size n with step h.
double laplacian_norm(std::size_t n, double h);

StabilityReport stability_report(const Problem& p, const Surface& s, double dT);

/// Relative L2 difference ||a - b|| / ||a|| over nodes with u <= u_max and v <= v_max.
double relative_l2(const Grid& g, const std::vector<double>& a, const std::vector<double>& b, double u_max = 1.0,
                   double v_max = 1.0);

}  // namespace ivsurf
