// SPDX-License-Identifier: MIT
#include "ivsurf/bench.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "parallel.hpp"

namespace ivsurf {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::Config, what); }

template <class E>
E pick(const std::string& key, const std::string& value, const std::map<std::string, E>& table) {
    const auto it = table.find(value);
    if (it == table.end()) config_error(key + ": unknown value '" + value + "'");
    return it->second;
}

template <class E>
std::string name_of(E value, const std::map<std::string, E>& table) {
    for (const auto& [k, v] : table)
        if (v == value) return k;
    return "?";
}

const std::map<std::string, MixedScheme> kSchemes{{"A", MixedScheme::A}, {"B", MixedScheme::B}};
const std::map<std::string, BetaPolicy> kBeta{{"bounds", BetaPolicy::Bounds}, {"coefficient", BetaPolicy::Coefficient}};
const std::map<std::string, Propagator> kPropagators{{"unsplit", Propagator::Unsplit}, {"strang", Propagator::Strang}};
const std::map<std::string, ConvectionFrame> kFrames{{"moving", ConvectionFrame::Moving},
                                                      {"static", ConvectionFrame::Static}};
const std::map<std::string, SeedOrigin> kSeeds{{"limit", SeedOrigin::Limit}, {"zero", SeedOrigin::Zero}};
const std::map<std::string, Right> kRights{{"Call", Right::Call}, {"Put", Right::Put}};

int steps_to(const SolverConfig& c) { return static_cast<int>(std::llround(c.T_max / c.dT)); }

void fill_missing(std::vector<double>& w) {
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!std::isnan(w[k])) continue;
        for (std::size_t d = 1; d < w.size(); ++d) {
            if (k >= d && !std::isnan(w[k - d])) {
                w[k] = w[k - d];
                break;
            }
            if (k + d < w.size() && !std::isnan(w[k + d])) {
                w[k] = w[k + d];
                break;
            }
        }
    }
}

}  // namespace

const char* to_string(Method m) {
    switch (m) {
        case Method::Pde: return "pde";
        case Method::Traditional: return "traditional";
        case Method::Hyperbolic1d: return "hyperbolic1d";
        case Method::Taylor: return "taylor";
    }
    return "?";
}

std::vector<Method> parse_methods(const std::string& list) {
    static const std::map<std::string, Method> table{{"pde", Method::Pde},
                                                     {"traditional", Method::Traditional},
                                                     {"hyperbolic1d", Method::Hyperbolic1d},
                                                     {"taylor", Method::Taylor}};
    std::vector<Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const Method m = pick("method", item, table);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) config_error("method: empty list");
    return out;
}

void RunConfig::validate() const {
    if (!(market.S > 0.0)) config_error("S must be positive");
    if (!(K_max > 0.0)) config_error("K_max must be positive");
    if (N_u < 4 || N_v < 4) config_error("N_u and N_v must be >= 4");
    if (!(R_c >= 1.0)) config_error("R_c must be >= 1");
    if (probe_size < 1) config_error("probe_size must be >= 1");
    // The (u, v) square is built from the call arbitrage bounds.
    if (right != Right::Call) config_error("option_type: only Call surfaces are supported");
    solver.validate();
}

Problem RunConfig::problem() const {
    validate();
    try {
        return Problem::make(market, K_max, N_u, N_v, R_c, solver, probe_size);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BadSpec) config_error(e.what());
        throw;
    }
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) config_error("config must be a JSON object");
    RunConfig c;
    SolverConfig& s = c.solver;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "S") c.market.S = val.get<double>();
            else if (key == "r") c.market.r = val.get<double>();
            else if (key == "q") c.market.q = val.get<double>();
            else if (key == "T_max") s.T_max = val.get<double>();
            else if (key == "K_max") c.K_max = val.get<double>();
            else if (key == "option_type") c.right = pick(key, val.get<std::string>(), kRights);
            else if (key == "N_u") c.N_u = val.get<int>();
            else if (key == "N_v") c.N_v = val.get<int>();
            else if (key == "R_c") c.R_c = val.get<double>();
            else if (key == "dT") s.dT = val.get<double>();
            else if (key == "outer_tol") s.outer_tol = val.get<double>();
            else if (key == "outer_max_iter") s.outer_max_iter = val.get<int>();
            else if (key == "inner_tol") s.inner_tol = val.get<double>();
            else if (key == "inner_max_iter") s.inner_max_iter = val.get<int>();
            else if (key == "mixed_scheme") s.mixed_scheme = pick(key, val.get<std::string>(), kSchemes);
            else if (key == "beta_policy") s.beta_policy = pick(key, val.get<std::string>(), kBeta);
            else if (key == "rho") s.rho = val.get<double>();
            else if (key == "z_floor_rel") s.z_floor_rel = val.get<double>();
            else if (key == "delta_S_rel") s.delta_S_rel = val.get<double>();
            else if (key == "propagator") s.propagator = pick(key, val.get<std::string>(), kPropagators);
            else if (key == "convection") s.convection = pick(key, val.get<std::string>(), kFrames);
            else if (key == "first_step_iters") s.first_step_iters = val.get<int>();
            else if (key == "seed_origin") s.seed_origin = pick(key, val.get<std::string>(), kSeeds);
            else if (key == "parallel") s.parallel = val.get<bool>();
            else if (key == "probe_size") c.probe_size = val.get<int>();
            else if (key == "method") c.methods = parse_methods(val.get<std::string>());
            else if (key == "out_dir") c.out_dir = val.get<std::string>();
            else config_error("unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        config_error(std::string("bad value type: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    std::string methods;
    for (Method m : this->methods) methods += (methods.empty() ? "" : ",") + std::string(to_string(m));
    return json{{"S", market.S},
                {"r", market.r},
                {"q", market.q},
                {"T_max", solver.T_max},
                {"K_max", K_max},
                {"option_type", name_of(right, kRights)},
                {"N_u", N_u},
                {"N_v", N_v},
                {"R_c", R_c},
                {"dT", solver.dT},
                {"outer_tol", solver.outer_tol},
                {"outer_max_iter", solver.outer_max_iter},
                {"inner_tol", solver.inner_tol},
                {"inner_max_iter", solver.inner_max_iter},
                {"mixed_scheme", name_of(solver.mixed_scheme, kSchemes)},
                {"beta_policy", name_of(solver.beta_policy, kBeta)},
                {"rho", solver.rho},
                {"z_floor_rel", solver.z_floor_rel},
                {"delta_S_rel", solver.delta_S_rel},
                {"propagator", name_of(solver.propagator, kPropagators)},
                {"convection", name_of(solver.convection, kFrames)},
                {"first_step_iters", solver.first_step_iters},
                {"seed_origin", name_of(solver.seed_origin, kSeeds)},
                {"parallel", solver.parallel},
                {"probe_size", probe_size},
                {"method", methods}};
}

TraditionalRun traditional_surface(const Problem& p, double T) {
    const auto t0 = Clock::now();
    TraditionalRun r;
    r.surface = traditional_values(p, T, &r.failures);
    r.seconds = since(t0);
    const double interior = static_cast<double>((p.grid.nu() - 2) * (p.grid.nv() - 2));
    r.per_node = r.seconds / interior;
    return r;
}

CompareRow compare(const Grid& g, const Surface& a, const Surface& b, double u_max, double v_max) {
    if (a.w.size() != g.size() || b.w.size() != g.size())
        throw Error(ErrorCode::GridMismatch, "compared surfaces do not share the grid");
    CompareRow row;
    row.T = b.T;
    row.eps = relative_l2(g, a.w, b.w);
    row.eps_trunc = relative_l2(g, a.w, b.w, u_max, v_max);
    for (std::size_t i = 0; i < g.nu(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j) {
            const double d = std::abs(a.w[g.idx(i, j)] - b.w[g.idx(i, j)]);
            row.max_abs = std::max(row.max_abs, d);
            if (g.u.x[i] <= u_max + 1e-12 && g.v.x[j] <= v_max + 1e-12) row.max_abs_trunc = std::max(row.max_abs_trunc, d);
        }
    return row;
}

void write_surface_csv_header(std::ostream& os) { os << "T,u,v,K,Z,frak_sigma,sigma\n"; }

void write_surface_csv(std::ostream& os, const Problem& p, const Surface& s) {
    const DomainSpec spec = p.domain(s.T);
    const double sqrtT = std::sqrt(s.T);
    os << std::setprecision(17);
    for (std::size_t i = 0; i < p.grid.nu(); ++i)
        for (std::size_t j = 0; j < p.grid.nv(); ++j) {
            const double u = p.grid.u.x[i], v = p.grid.v.x[j];
            const auto [K, Z] = map_coordinates(spec, u, v);
            const double w = s.w[p.grid.idx(i, j)];
            os << s.T << ',' << u << ',' << v << ',' << K << ',' << Z << ',' << w << ',' << w / sqrtT << '\n';
        }
}

LineSet hyperbolic_seed(const Problem& p, double T) {
    const DomainSpec a = p.domain(p.cfg.dT), b = p.domain(p.cfg.T_max);
    // Keep every node inside the arbitrage interval for all maturities in the run.
    const double F_ref = std::max(a.F, b.F);
    const double SQ_ref = std::min(a.SQ(), b.SQ());
    LineSet lines;
    lines.T = T;
    for (std::size_t j = 1; j < p.grid.nv(); ++j) lines.K.push_back(F_ref + (p.K_max - F_ref) * p.grid.v.x[j]);
    for (std::size_t i = 1; i + 1 < p.grid.nu(); ++i) lines.Z.push_back(SQ_ref * p.grid.u.x[i]);
    return hyperbolic_reference(p, lines);
}

LineSet hyperbolic_reference(const Problem& p, const LineSet& like) {
    LineSet out = like;
    const BoundaryPolicy policy{p.cfg.z_floor_rel, p.cfg.delta_S_rel};
    out.w.assign(out.K.size(), std::vector<double>(out.Z.size(), 0.0));
    detail::for_each_index(static_cast<std::ptrdiff_t>(out.K.size()), p.cfg.parallel, [&](std::ptrdiff_t l) {
        auto& line = out.w[static_cast<std::size_t>(l)];
        for (std::size_t k = 0; k < out.Z.size(); ++k) {
            try {
                line[k] = implied_total_vol(p.market, {out.K[l], out.T, Right::Call}, out.Z[k], RootConfig{}, policy);
            } catch (const Error&) {
                line[k] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        fill_missing(line);
    });
    return out;
}

void hyperbolic_advance(const Problem& p, LineSet& lines, double dT) {
    const BoundaryPolicy policy{p.cfg.z_floor_rel, p.cfg.delta_S_rel};
    detail::for_each_index(static_cast<std::ptrdiff_t>(lines.K.size()), p.cfg.parallel, [&](std::ptrdiff_t l) {
        const double K = lines.K[static_cast<std::size_t>(l)];
        const double inflow = implied_total_vol(p.market, {K, lines.T + dT, Right::Call}, lines.Z[0], RootConfig{}, policy);
        auto& line = lines.w[static_cast<std::size_t>(l)];
        line = hyperbolic_step_1d(line, lines.Z, K, lines.T, dT, p.market, inflow);
    });
    lines.T += dT;
}

namespace {

/// Relative L2 error over nodes with Z <= z_frac * Z_max.
double lines_rel_l2(const LineSet& ref, const LineSet& x, double z_frac = 1.0) {
    double num = 0.0, den = 0.0;
    const double z_cut = z_frac * ref.Z.back();
    for (std::size_t l = 0; l < ref.w.size(); ++l)
        for (std::size_t k = 0; k < ref.w[l].size() && ref.Z[k] <= z_cut; ++k) {
            const double d = ref.w[l][k] - x.w[l][k];
            num += d * d;
            den += ref.w[l][k] * ref.w[l][k];
        }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

void write_lines_csv(std::ostream& os, const Problem& p, const LineSet& lines) {
    const DomainSpec spec = p.domain(lines.T);
    const double sqrtT = std::sqrt(lines.T);
    os << std::setprecision(17);
    for (std::size_t l = 0; l < lines.K.size(); ++l)
        for (std::size_t k = 0; k < lines.Z.size(); ++k) {
            double u = std::numeric_limits<double>::quiet_NaN(), v = u;
            try {
                const UnitPoint pt = inverse_map(spec, lines.K[l], lines.Z[k]);
                u = pt.u;
                v = pt.v;
            } catch (const Error&) {
            }
            const double w = lines.w[l][k];
            os << lines.T << ',' << u << ',' << v << ',' << lines.K[l] << ',' << lines.Z[k] << ',' << w << ','
               << w / sqrtT << '\n';
        }
}

json report_json(const StepReport& r) {
    return json{{"step", r.step},
                {"T", r.T},
                {"iterations", r.iterations},
                {"changes", r.changes},
                {"residual", r.residual},
                {"seconds", r.seconds},
                {"t_assemble", r.t_assemble},
                {"t_solve", r.t_solve},
                {"t_boundary", r.t_boundary},
                {"converged", r.converged}};
}

json stability_json(const StabilityReport& s) {
    return json{{"norm_du2", s.norm_du2}, {"norm_duv", s.norm_duv}, {"d_coeff", s.d_coeff},
                {"ratio", s.ratio},       {"satisfied", s.satisfied}, {"degenerate", s.degenerate}};
}

json compare_json(const CompareRow& c) {
    return json{{"T", c.T},
                {"eps", c.eps},
                {"eps_trunc", c.eps_trunc},
                {"max_abs", c.max_abs},
                {"max_abs_trunc", c.max_abs_trunc},
                {"iterations", c.iterations},
                {"t_method", c.t_method},
                {"t_traditional", c.t_traditional}};
}

/// Output sink that does nothing when no directory was requested.
class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }
    bool enabled() const { return !dir_.empty(); }
    std::ofstream open(const std::string& name) const {
        std::ofstream os(std::filesystem::path(dir_) / name);
        if (!os) throw Error(ErrorCode::Config, "cannot write '" + name + "' in '" + dir_ + "'");
        return os;
    }
    void write_json(const std::string& name, const json& j) const {
        if (!enabled()) return;
        open(name) << j.dump(2) << '\n';
    }

private:
    std::string dir_;
};

struct MethodRun {
    Method method;
    std::vector<double> T;
    std::vector<int> iterations;
    std::vector<double> seconds;
    std::vector<double> eps, eps_trunc;  ///< empty without a traditional reference
};

void print_table(std::ostream& os, const MethodRun& run) {
    os << "method " << to_string(run.method) << '\n';
    os << "  Step |    T | Iterations |         eps | eps(u,v<=0.8) | t elapsed [s]\n";
    for (std::size_t n = 0; n < run.T.size(); ++n) {
        os << std::setw(6) << n + 1 << " | " << std::fixed << std::setprecision(2) << std::setw(4) << run.T[n]
           << " | " << std::setw(10) << run.iterations[n] << " | ";
        if (n < run.eps.size()) {
            os << std::scientific << std::setprecision(3) << std::setw(11) << run.eps[n] << " | " << std::setw(13)
               << run.eps_trunc[n];
        } else {
            os << std::setw(11) << "-" << " | " << std::setw(13) << "-";
        }
        os << " | " << std::fixed << std::setprecision(3) << std::setw(13) << run.seconds[n] << '\n';
        os.unsetf(std::ios::floatfield);
    }
}

struct CliOptions {
    std::string config;
    std::string methods;
    std::string out;
    bool seed_validation = false;
    bool stability = false;
};

int execute(const RunConfig& rc, const Problem& p, const CliOptions& opt) {
    const Outputs out(rc.out_dir);
    const SolverConfig& cfg = p.cfg;
    const int steps = steps_to(cfg);
    const bool want_trad = std::find(rc.methods.begin(), rc.methods.end(), Method::Traditional) != rc.methods.end();
    std::cout << std::setprecision(6);

    // Reference surfaces at every time level.
    std::vector<TraditionalRun> trad;
    if (want_trad) {
        std::optional<std::ofstream> csv;
        if (out.enabled()) {
            csv = out.open("traditional_surface.csv");
            write_surface_csv_header(*csv);
        }
        json rows = json::array();
        double total = 0.0;
        int failures = 0;
        for (int n = 1; n <= steps; ++n) {
            trad.push_back(traditional_surface(p, n * cfg.dT));
            const TraditionalRun& t = trad.back();
            total += t.seconds;
            failures += t.failures;
            if (csv) write_surface_csv(*csv, p, t.surface);
            rows.push_back({{"T", t.surface.T}, {"seconds", t.seconds}, {"per_node", t.per_node}, {"failures", t.failures}});
        }
        out.write_json("traditional_report.json", {{"config", rc.to_json()}, {"steps", rows}, {"seconds", total}});
        std::cout << "method traditional: " << steps << " surfaces in " << total << " s, "
                  << total / steps / ((p.grid.nu() - 2) * (p.grid.nv() - 2)) << " s per node, " << failures
                  << " fallback nodes\n";
    }

    if (opt.seed_validation) {
        const FirstStep fs = first_step(p, true);
        json j{{"config", rc.to_json()}, {"eps", fs.validation_eps}};
        out.write_json("seed_validation.json", j);
        std::cout << "first-step validation: eps after " << fs.validation_eps.size()
                  << " iterations = " << std::scientific << fs.validation_eps.back() << std::defaultfloat << '\n';
    }

    int status = 0;
    for (Method m : rc.methods) {
        if (m == Method::Traditional) continue;
        MethodRun run{m, {}, {}, {}, {}, {}};
        json steps_json = json::array();
        json compare_rows = json::array();
        std::optional<std::ofstream> csv;
        if (out.enabled()) {
            csv = out.open(std::string(to_string(m)) + (m == Method::Hyperbolic1d ? "_lines.csv" : "_surface.csv"));
            write_surface_csv_header(*csv);
        }
        auto record = [&](int, double T, int iterations, double seconds) {
            run.T.push_back(T);
            run.iterations.push_back(iterations);
            run.seconds.push_back(seconds);
        };
        auto record_compare = [&](const Surface& s, int n, int iterations, double seconds) {
            if (!want_trad) return;
            CompareRow row = compare(p.grid, trad[n - 1].surface, s);
            row.iterations = iterations;
            row.t_method = seconds;
            row.t_traditional = trad[n - 1].seconds;
            run.eps.push_back(row.eps);
            run.eps_trunc.push_back(row.eps_trunc);
            compare_rows.push_back(compare_json(row));
        };

        try {
            if (m == Method::Pde || m == Method::Taylor) {
                FirstStep fs = first_step(p, false);
                Surface s = fs.result.surface;
                if (csv) write_surface_csv(*csv, p, s);
                record(1, s.T, 0, fs.result.report.seconds);
                record_compare(s, 1, 0, fs.result.report.seconds);
                json first = report_json(fs.result.report);
                if (opt.stability) first["stability"] = stability_json(stability_report(p, s, cfg.dT));
                steps_json.push_back(first);
                int clamped = 0;
                for (int n = 2; n <= steps; ++n) {
                    json row;
                    if (m == Method::Pde) {
                        StepResult r;
                        try {
                            r = picard_advance(p, s, cfg.dT, n);
                        } catch (const OuterNoConvergenceError& e) {
                            steps_json.push_back(report_json(e.last().report));
                            throw;
                        }
                        s = std::move(r.surface);
                        row = report_json(r.report);
                        record(n, s.T, r.report.iterations, r.report.seconds);
                        record_compare(s, n, r.report.iterations, r.report.seconds);
                    } else {
                        const auto t0 = Clock::now();
                        TaylorResult r = taylor_update(p, s, cfg.dT);
                        const double secs = since(t0);
                        s = std::move(r.surface);
                        clamped += r.clamped;
                        row = {{"step", n}, {"T", s.T}, {"seconds", secs}, {"clamped", r.clamped},
                               {"residual", definition_residual(p, s)}};
                        record(n, s.T, 1, secs);
                        record_compare(s, n, 1, secs);
                    }
                    if (opt.stability) row["stability"] = stability_json(stability_report(p, s, cfg.dT));
                    if (csv) write_surface_csv(*csv, p, s);
                    steps_json.push_back(row);
                }
                if (m == Method::Taylor) std::cout << "taylor: " << clamped << " clamped nodes\n";
            } else {
                auto t0 = Clock::now();
                LineSet lines = hyperbolic_seed(p, cfg.dT);
                double secs = since(t0);
                auto emit = [&](int n, double seconds) {
                    if (csv) write_lines_csv(*csv, p, lines);
                    record(n, lines.T, n == 1 ? 0 : 1, seconds);
                    json row{{"step", n}, {"T", lines.T}, {"seconds", seconds}};
                    if (want_trad) {
                        const LineSet ref = hyperbolic_reference(p, lines);
                        run.eps.push_back(lines_rel_l2(ref, lines));
                        run.eps_trunc.push_back(lines_rel_l2(ref, lines, 0.8));
                        row["eps"] = run.eps.back();
                        row["eps_trunc"] = run.eps_trunc.back();
                    }
                    steps_json.push_back(row);
                };
                emit(1, secs);
                for (int n = 2; n <= steps; ++n) {
                    t0 = Clock::now();
                    hyperbolic_advance(p, lines, cfg.dT);
                    emit(n, since(t0));
                }
            }
        } catch (const Error& e) {
            std::cerr << to_string(m) << ": " << e.what() << '\n';
            status = 1;
        }

        out.write_json(std::string(to_string(m)) + "_report.json", {{"config", rc.to_json()}, {"steps", steps_json}});
        if (want_trad && m != Method::Hyperbolic1d)
            out.write_json("compare_" + std::string(to_string(m)) + ".json", {{"rows", compare_rows}});
        print_table(std::cout, run);
    }
    return status;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Implied volatility surface by forward PDE marching"};
    CliOptions opt;
    app.add_option("--config", opt.config, "JSON run configuration")->required();
    app.add_option("--method", opt.methods, "comma-separated: pde, traditional, hyperbolic1d, taylor");
    app.add_option("--out", opt.out, "output directory for CSV surfaces and JSON reports");
    app.add_flag("--seed-validation", opt.seed_validation, "run the first-step validation iteration");
    app.add_flag("--stability", opt.stability, "report the stability diagnostic per step");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    RunConfig rc;
    Problem p;
    try {
        rc = RunConfig::load(opt.config);
        if (!opt.methods.empty()) rc.methods = parse_methods(opt.methods);
        if (!opt.out.empty()) rc.out_dir = opt.out;
        p = rc.problem();
    } catch (const Error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return 2;
    }

    try {
        return execute(rc, p, opt);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}

}  // namespace ivsurf
