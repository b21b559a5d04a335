// SPDX-License-Identifier: MIT
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ivsurf/bench.hpp"

using namespace ivsurf;
using nlohmann::json;

namespace {

json small_config() {
    return json{{"S", 100.0}, {"r", 0.05},       {"q", 0.01},  {"T_max", 0.03}, {"K_max", 400.0},
                {"option_type", "Call"}, {"N_u", 24}, {"N_v", 12}, {"R_c", 20.0}, {"dT", 0.01}};
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ivsurf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ivsurf");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config parsing") {
    const RunConfig c = RunConfig::from_json(small_config());
    CHECK(c.N_u == 24);
    CHECK(c.solver.T_max == 0.03);
    CHECK(c.market.q == 0.01);

    json unknown = small_config();
    unknown["N_w"] = 3;
    CHECK_THROWS_AS(RunConfig::from_json(unknown), Error);

    json put = small_config();
    put["option_type"] = "Put";
    CHECK_THROWS_AS(RunConfig::from_json(put), Error);

    json tiny = small_config();
    tiny["N_v"] = 3;
    CHECK_THROWS_AS(RunConfig::from_json(tiny), Error);

    json wrong_type = small_config();
    wrong_type["S"] = "hundred";
    CHECK_THROWS_AS(RunConfig::from_json(wrong_type), Error);

    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK(parse_methods("pde,traditional").size() == 2);
    CHECK_THROWS_AS(parse_methods("pde,fast"), Error);
}

TEST_CASE("compare") {
    const RunConfig c = RunConfig::from_json(small_config());
    const Problem p = c.problem();
    const Surface a = traditional_surface(p, 0.02).surface;
    CHECK(compare(p.grid, a, a).eps == 0.0);
    Surface b = a;
    for (double& w : b.w) w *= 1.0 + 1e-4;
    const CompareRow row = compare(p.grid, a, b);
    CHECK(row.eps == doctest::Approx(1e-4).epsilon(1e-8));
    CHECK(row.eps_trunc == doctest::Approx(1e-4).epsilon(1e-8));
    CHECK(row.max_abs > 0.0);
    Surface bad = a;
    bad.w.pop_back();
    CHECK_THROWS_AS(compare(p.grid, a, bad), Error);
}

TEST_CASE("traditional surface") {
    const Problem p = RunConfig::from_json(small_config()).problem();
    const TraditionalRun r = traditional_surface(p, 0.02);
    CHECK(r.failures == 0);
    CHECK(r.seconds > 0.0);
    CHECK(r.per_node > 0.0);
    for (std::size_t i = 0; i < p.grid.nu(); ++i) CHECK(r.surface.w[p.grid.idx(i, 0)] == 0.0);
}

TEST_CASE("surface CSV layout") {
    const Problem p = RunConfig::from_json(small_config()).problem();
    const Surface s = traditional_surface(p, 0.02).surface;
    std::ostringstream os;
    write_surface_csv_header(os);
    write_surface_csv(os, p, s);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "T,u,v,K,Z,frak_sigma,sigma");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == p.grid.size());
}

TEST_CASE("command line") {
    const auto dir = scratch("cli");
    const auto cfg = dir / "run.json";
    std::ofstream(cfg) << small_config().dump();

    CHECK(cli({"--config", (dir / "missing.json").string()}) == 2);
    CHECK(cli({"--method", "pde"}) == 2);
    CHECK(cli({"--config", cfg.string(), "--method", "warp"}) == 2);

    const auto out1 = dir / "a", out2 = dir / "b";
    CHECK(cli({"--config", cfg.string(), "--method", "pde,traditional", "--out", out1.string(), "--stability"}) == 0);
    CHECK(std::filesystem::exists(out1 / "pde_surface.csv"));
    CHECK(std::filesystem::exists(out1 / "pde_report.json"));
    CHECK(std::filesystem::exists(out1 / "traditional_surface.csv"));
    CHECK(std::filesystem::exists(out1 / "compare_pde.json"));
    const json report = json::parse(slurp(out1 / "pde_report.json"));
    CHECK(report["steps"].size() == 3);
    CHECK(report["steps"][1].contains("stability"));

    // Same configuration, same bytes.
    CHECK(cli({"--config", cfg.string(), "--method", "pde,traditional", "--out", out2.string(), "--stability"}) == 0);
    CHECK(slurp(out1 / "pde_surface.csv") == slurp(out2 / "pde_surface.csv"));
    CHECK(slurp(out1 / "traditional_surface.csv") == slurp(out2 / "traditional_surface.csv"));

    CHECK(cli({"--config", cfg.string(), "--method", "taylor,hyperbolic1d,traditional", "--out", out1.string(),
               "--seed-validation"}) == 0);
    CHECK(std::filesystem::exists(out1 / "taylor_surface.csv"));
    CHECK(std::filesystem::exists(out1 / "hyperbolic1d_lines.csv"));
    CHECK(std::filesystem::exists(out1 / "seed_validation.json"));

    // A solver failure maps to exit code 1.
    json strict = small_config();
    strict["outer_max_iter"] = 2;
    strict["outer_tol"] = 1e-15;
    const auto cfg2 = dir / "strict.json";
    std::ofstream(cfg2) << strict.dump();
    CHECK(cli({"--config", cfg2.string(), "--method", "pde"}) == 1);
    std::filesystem::remove_all(dir);
}
