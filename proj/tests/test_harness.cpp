#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "rcbsde/harness.hpp"

namespace fs = std::filesystem;
using namespace rcbsde;
using Json = nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "rcbsde_harness_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const std::string& leaf, const std::string& text) {
    const fs::path path = scratch_dir("configs") / leaf;
    std::ofstream out(path);
    out << text;
    return path;
}

Json load_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    return Json::parse(in);
}

}  // namespace

TEST_CASE("config files parse sections, lists, and comments") {
    const auto path = write_config("full.cfg",
                                   "# experiment description\n"
                                   "model = nondominated-jump\n"
                                   "x = 0.5, -0.25\n"
                                   "grid.steps = 40   # trailing comment\n"
                                   "bsde.n_paths = 1234\n"
                                   "bsde.penalties = 1, 2, 4\n"
                                   "\n"
                                   "basis.kind = polynomial\n"
                                   "basis.degree = 2\n"
                                   "seed = 99\n"
                                   "output = out_here\n"
                                   "fd.nodes = 201\n"
                                   "validation.laplace = false\n");
    const auto cfg = parse_config_file(path.string());
    CHECK(cfg.model_name == "nondominated-jump");
    REQUIRE(cfg.x.size() == 2);
    CHECK(cfg.x[0] == 0.5);
    CHECK(cfg.x[1] == -0.25);
    CHECK(cfg.steps == 40);
    CHECK(cfg.n_paths == 1234);
    CHECK(cfg.penalties == std::vector<double>{1.0, 2.0, 4.0});
    CHECK(cfg.basis.kind == BasisKind::polynomial);
    CHECK(cfg.basis.degree == 2);
    CHECK(cfg.master_seed == 99);
    CHECK(cfg.output == "out_here");
    CHECK(cfg.fd.nodes == 201);
    CHECK_FALSE(cfg.fd_bounds_set);
    CHECK_FALSE(cfg.val_laplace);
    CHECK(cfg.val_martingale);   // untouched default
    CHECK(cfg.penalty == 5.0);   // untouched default
    CHECK(cfg.workers == 1);
}

TEST_CASE("config errors carry the offending line number") {
    const auto unknown = write_config("unknown.cfg", "model = uvm\nseed = 1\nwat = 1\n");
    CHECK_THROWS_WITH_AS(parse_config_file(unknown.string()),
                         doctest::Contains("config line 3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_file(unknown.string()), doctest::Contains("unknown key"),
                         ConfigError);

    const auto noeq = write_config("noeq.cfg", "model uvm\n");
    CHECK_THROWS_WITH_AS(parse_config_file(noeq.string()),
                         doctest::Contains("expected 'key = value'"), ConfigError);

    const auto badnum = write_config("badnum.cfg", "grid.steps = soon\n");
    CHECK_THROWS_WITH_AS(parse_config_file(badnum.string()), doctest::Contains("line 1"),
                         ConfigError);

    CHECK_THROWS_WITH_AS(parse_config_file("/nonexistent/nope.cfg"),
                         doctest::Contains("cannot open"), ConfigError);

    ExperimentConfig cfg;
    CHECK_THROWS_AS(apply_config_entry(cfg, "bsde.penalty", "many", 0), ConfigError);
    apply_config_entry(cfg, "bsde.penalty", "7.5", 0);
    CHECK(cfg.penalty == 7.5);
}

TEST_CASE("output directory resolution prefers cli over env over config") {
    ExperimentConfig cfg;
    cfg.output = "from_config";
    unsetenv("RCBSDE_OUT");
    CHECK(resolve_output_dir(cfg, "") == "from_config");
    setenv("RCBSDE_OUT", "from_env", 1);
    CHECK(resolve_output_dir(cfg, "") == "from_env");
    CHECK(resolve_output_dir(cfg, "from_cli") == "from_cli");
    setenv("RCBSDE_OUT", "", 1);  // empty counts as unset
    CHECK(resolve_output_dir(cfg, "") == "from_config");
    unsetenv("RCBSDE_OUT");
}

TEST_CASE("solve runs end to end and reports deterministically") {
    ExperimentConfig cfg;
    cfg.model_name = "trivial-drift";
    cfg.anchor = {0.0};
    cfg.n_paths = 2000;
    cfg.steps = 10;
    cfg.penalty = 2.0;

    const auto dir1 = scratch_dir("solve1");
    const auto dir2 = scratch_dir("solve2");
    const auto dir3 = scratch_dir("solve3");
    std::ostringstream log;
    CHECK(run_solve(cfg, dir1.string(), log) == 0);
    cfg.workers = 3;
    CHECK(run_solve(cfg, dir2.string(), log) == 0);
    cfg.workers = 1;
    CHECK(run_solve(cfg, dir3.string(), log) == 0);

    auto j1 = load_json(dir1 / "solve_report.json");
    auto j2 = load_json(dir2 / "solve_report.json");
    auto j3 = load_json(dir3 / "solve_report.json");
    CHECK(j1["result"]["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j1["result"]["model"] == "trivial-drift");

    // numeric payloads are invariant to worker count and reruns
    CHECK(j1["result"] == j2["result"]);
    CHECK(j1["validation"] == j2["validation"]);
    j1.erase("timings");
    j3.erase("timings");
    CHECK(j1.dump() == j3.dump());
}

TEST_CASE("sweep writes the stable two-file report") {
    ExperimentConfig cfg;
    cfg.model_name = "trivial-drift";
    cfg.n_paths = 1500;
    cfg.steps = 8;
    cfg.penalties = {1.0, 2.0};
    cfg.interior_probes = 2;

    const auto dir = scratch_dir("sweep");
    std::ostringstream log;
    CHECK(run_sweep(cfg, dir.string(), log) == 0);

    const auto sweep = load_json(dir / "sweep.json");
    CHECK(sweep.size() == 8);
    for (const char* key : {"model", "grid", "penalties", "values", "stderr", "constraint_norms",
                            "a_spreads", "seed"})
        CHECK(sweep.contains(key));
    CHECK(sweep["grid"]["steps"] == 8);
    CHECK(sweep["penalties"].size() == 2);
    CHECK(sweep["values"].size() == 2);
    CHECK(sweep["values"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fs::exists(dir / "sweep.csv"));
    CHECK(fs::exists(dir / "sweep_report.json"));

    cfg.penalties = {3.0};
    CHECK_THROWS_AS(run_sweep(cfg, dir.string(), log), ConfigError);
}

TEST_CASE("reference runs the solver and records oracle comparisons") {
    ExperimentConfig cfg;
    cfg.model_name = "uvm";
    cfg.fd.nodes = 101;

    const auto dir = scratch_dir("reference");
    std::ostringstream log;
    CHECK(run_reference(cfg, dir.string(), log) == 0);
    CHECK(fs::exists(dir / "fd.csv"));
    const auto rep = load_json(dir / "reference_report.json");
    CHECK(rep["command"] == "reference");
    CHECK(rep["result"]["nodes"] == 101);
    REQUIRE(rep["result"]["comparison"].size() == 1);
    const auto row = rep["result"]["comparison"][0];
    CHECK(row["x"].get<double>() == 100.0);
    // coarse grid: still within a percent of the closed form
    CHECK(std::abs(row["rel_error"].get<double>()) < 0.01);
}

TEST_CASE("solver guards propagate out of the driver") {
    ExperimentConfig cfg;
    cfg.model_name = "trivial-drift";
    cfg.n_paths = 500;
    cfg.steps = 5;      // dt = 0.2
    cfg.penalty = 10.0; // n dt = 2 > 1
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(run_solve(cfg, scratch_dir("guard").string(), log),
                         doctest::Contains("penalty violates step bound"), std::invalid_argument);
}

TEST_CASE("unknown models become config errors") {
    ExperimentConfig cfg;
    cfg.model_name = "nope";
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(run_solve(cfg, scratch_dir("bad").string(), log),
                         doctest::Contains("unknown model"), ConfigError);
}
