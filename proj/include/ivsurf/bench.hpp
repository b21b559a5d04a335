// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivsurf/engine.hpp"

namespace ivsurf {

enum class Method { Pde, Traditional, Hyperbolic1d, Taylor };

const char* to_string(Method m);
/// Parses a comma-separated list such as "pde,traditional". Throws Config.
std::vector<Method> parse_methods(const std::string& list);

/// One surface build. JSON keys mirror the input table (S, r, q, T_max, K_max,
/// option_type, N_u, N_v, R_c) plus dT and the solver fields; unknown keys are
/// rejected.
struct RunConfig {
    MarketParams market{100.0, 0.05, 0.01};
    double K_max = 400.0;
    Right right = Right::Call;
    int N_u = 200;
    int N_v = 100;
    double R_c = 20.0;
    int probe_size = 50;
    SolverConfig solver;
    std::vector<Method> methods{Method::Pde};
    std::string out_dir;

    void validate() const;
    Problem problem() const;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

struct TraditionalRun {
    Surface surface;
    double seconds = 0.0;
    int failures = 0;
    double per_node = 0.0;  ///< mean seconds per interior node
};

/// Per-node inversion of the whole grid at maturity T, timed with a monotonic clock.
TraditionalRun traditional_surface(const Problem& p, double T);

struct CompareRow {
    double T = 0.0;
    double eps = 0.0;        ///< ||a - b|| / ||a|| over the grid
    double eps_trunc = 0.0;  ///< same over u, v <= truncation
    double max_abs = 0.0;
    double max_abs_trunc = 0.0;
    int iterations = 0;
    double t_method = 0.0;
    double t_traditional = 0.0;
};

/// Compares b against the reference a. Throws GridMismatch.
CompareRow compare(const Grid& g, const Surface& a, const Surface& b, double u_max = 0.8, double v_max = 0.8);

void write_surface_csv_header(std::ostream& os);
/// Rows T,u,v,K,Z,frak_sigma,sigma over the grid, row-major in (u, v).
void write_surface_csv(std::ostream& os, const Problem& p, const Surface& s);

/// Fixed-strike lines for the one-dimensional transport form. Strikes are the
/// u = 0 strikes of the v axis at T_max and Z nodes follow the u axis scaled to S Q at T_max.
struct LineSet {
    std::vector<double> K;
    std::vector<double> Z;
    std::vector<std::vector<double>> w;  ///< w[line][node]
    double T = 0.0;
};

LineSet hyperbolic_seed(const Problem& p, double T);
/// Advances every line by dT, inflow at Z[0] from the traditional inversion.
void hyperbolic_advance(const Problem& p, LineSet& lines, double dT);
/// Traditional values on the same lines.
LineSet hyperbolic_reference(const Problem& p, const LineSet& like);

/// Entry point of the command-line tool. Returns 0 on success, 1 on solver
/// failure and 2 on configuration errors.
int run_cli(int argc, char** argv);

}  // namespace ivsurf
