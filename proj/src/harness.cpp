#include "rcbsde/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rcbsde/forward.hpp"
#include "rcbsde/model.hpp"
#include "rcbsde/validation.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace rcbsde {

namespace {

[[noreturn]] void bad_config(int line, const std::string& msg) {
    if (line > 0) throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    throw ConfigError("config: " + msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value, int line) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        bad_config(line, "invalid number '" + value + "' for key '" + key + "'");
    }
}

long parse_long(const std::string& key, const std::string& value, int line) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        bad_config(line, "invalid integer '" + value + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_config(line, "invalid boolean '" + value + "' for key '" + key + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value, int line) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item, line));
    }
    if (out.empty()) bad_config(line, "empty list for key '" + key + "'");
    return out;
}

ControlledModel resolved_model(const ExperimentConfig& cfg) {
    try {
        return make_benchmark(cfg.model_name);
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: unknown model '" + cfg.model_name + "'");
    }
}

std::vector<double> default_x(const ControlledModel& model) {
    if (model.name == "uvm") return {100.0};
    return std::vector<double>(size_t(model.dim_x), 0.0);
}

void default_fd_bounds(const ControlledModel& model, FdGrid& g) {
    if (model.name == "uvm") {
        g.x_min = 20.0;
        g.x_max = 300.0;
    } else if (model.name == "nondominated-jump") {
        g.x_min = -9.0;
        g.x_max = 9.0;
    } else {
        g.x_min = -2.0;
        g.x_max = 4.0;
    }
}

// Constant-control oracle values; both benchmarks have convex terminal costs,
// so the extreme control is optimal and the closed forms apply at any probe.
double oracle_value(const ControlledModel& model, double t, double x) {
    const double T = model.horizon - t;
    if (model.name == "uvm") return bs_closed_form(x, 100.0, T, 0.3);
    if (model.name == "nondominated-jump")
        return poisson_series_value(x, 1.5, 1.0, T, [](double y) { return std::abs(y); }, 256);
    if (model.name == "trivial-drift") return x + T;
    return std::numeric_limits<double>::quiet_NaN();
}

Json config_json(const ExperimentConfig& cfg) {
    Json j;
    j["model"] = cfg.model_name;
    j["t"] = cfg.t;
    j["x"] = cfg.x;
    j["anchor"] = cfg.anchor;
    j["grid.steps"] = cfg.steps;
    j["bsde.n_paths"] = cfg.n_paths;
    j["bsde.penalty"] = cfg.penalty;
    j["bsde.penalties"] = cfg.penalties;
    j["bsde.interior_probes"] = cfg.interior_probes;
    j["bsde.smoothing"] = cfg.smoothing;
    j["bsde.debias"] = cfg.debias;
    j["bsde.workers"] = cfg.workers;
    j["basis.kind"] = cfg.basis.kind_name();
    j["basis.degree"] = cfg.basis.degree;
    j["basis.cells"] = cfg.basis.cells_per_dim;
    j["basis.min_cell_occupancy"] = cfg.basis.min_cell_occupancy;
    j["seed"] = cfg.master_seed;
    j["output"] = cfg.output;
    j["dump_paths"] = cfg.dump_paths;
    j["fd.x_min"] = cfg.fd.x_min;
    j["fd.x_max"] = cfg.fd.x_max;
    j["fd.nodes"] = cfg.fd.nodes;
    j["fd.time_steps"] = cfg.fd.time_steps;
    j["fd.control_nodes"] = cfg.fd.control_nodes;
    j["fd.delta"] = cfg.fd.delta_split;
    j["fd.margin"] = cfg.fd.extrapolation_margin;
    j["fd.probes"] = cfg.fd_probes;
    j["validation.laplace"] = cfg.val_laplace;
    j["validation.martingale"] = cfg.val_martingale;
    j["validation.counts"] = cfg.val_counts;
    j["validation.assumptions"] = cfg.val_assumptions;
    j["validation.threshold"] = cfg.val_threshold;
    return j;
}

Json stat_json(const StatTestReport& r) {
    return Json{{"statistic", r.statistic}, {"std_error", r.std_error},
                {"z_score", r.z_score},     {"threshold", r.threshold},
                {"pass", r.pass},           {"n_samples", r.n_samples}};
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_paths_csv(const fs::path& path, const ControlledModel& model,
                     const PathEnsemble& ens) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "path,step,time";
    for (int j = 0; j < ens.dim_x; ++j) out << ",x" << j;
    for (int j = 0; j < ens.dim_a; ++j) out << ",i" << j;
    out << ",jump_count_so_far\n";
    out.precision(17);
    std::vector<double> I(size_t(ens.dim_a), 0.0);
    for (int p = 0; p < ens.n_paths; ++p) {
        int jumps_seen = 0;
        size_t next_event = 0;
        const auto& evs = ens.jumps[size_t(p)];
        for (int k = 0; k <= ens.grid.steps; ++k) {
            while (next_event < evs.size() && evs[next_event].step < k) {
                ++jumps_seen;
                ++next_event;
            }
            surjection_h(&ens.w[size_t(k)][size_t(p) * size_t(ens.dim_a)], model.control_set,
                         I.data());
            out << p << ',' << k << ',' << ens.grid.time_at(k);
            for (int j = 0; j < ens.dim_x; ++j)
                out << ',' << ens.X[size_t(k)][size_t(p) * size_t(ens.dim_x) + size_t(j)];
            for (int j = 0; j < ens.dim_a; ++j) out << ',' << I[size_t(j)];
            out << ',' << jumps_seen << '\n';
        }
    }
}

void write_fd_csv(const fs::path& path, double t, const FdSolution& sol) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "time,x,value\n";
    out.precision(17);
    for (size_t j = 0; j < sol.x.size(); ++j)
        out << t << ',' << sol.x[j] << ',' << sol.values[j] << '\n';
    for (size_t j = 0; j < sol.x.size(); ++j)
        out << t + sol.horizon << ',' << sol.x[j] << ',' << sol.terminal[j] << '\n';
}

bool constant_rate(const ControlledModel& model, double* rate_out) {
    const int q = model.dim_a;
    const double c0 = model.control_set.center.empty() ? 0.0 : model.control_set.center[0];
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i <= 6; ++i) {
        std::vector<double> a(size_t(q), c0);
        a[0] = c0 + model.control_set.radius * (double(i) / 3.0 - 1.0);
        const double r = model.intensity.total_rate(a.data());
        lo = i == 0 ? r : std::min(lo, r);
        hi = i == 0 ? r : std::max(hi, r);
    }
    *rate_out = hi;
    return hi - lo < 1e-12;
}

// The statistical property suite shared by `solve` and `validate`. `sol` may
// be null when no backward solution is available.
Json validation_suite(const ControlledModel& model, const ExperimentConfig& cfg,
                      const PathEnsemble& ens, const BsdeSolution* sol, std::ostream& log,
                      bool* all_pass) {
    Json out;
    *all_pass = true;
    const double z = cfg.val_threshold;
    const auto add = [&](const std::string& name, const StatTestReport& r) {
        out[name] = stat_json(r);
        *all_pass = *all_pass && r.pass;
        log << "  [validation] " << name << ": " << (r.pass ? "pass" : "FAIL")
            << " (z = " << r.z_score << ")\n";
    };

    if (cfg.val_assumptions) {
        const AssumptionReport rep = validate_model(model, 2000, cfg.master_seed);
        out["assumptions"] = Json{{"lipschitz_b", rep.lipschitz_b},
                                  {"lipschitz_sigma", rep.lipschitz_sigma},
                                  {"lipschitz_beta", rep.lipschitz_beta},
                                  {"growth_g", rep.growth_g},
                                  {"max_rate_seen", rep.max_rate_seen},
                                  {"pass", rep.all_clear()}};
        *all_pass = *all_pass && rep.all_clear();
        log << "  [validation] assumptions: " << (rep.all_clear() ? "pass" : "FAIL") << "\n";
    }

    const bool atomic = model.has_jumps() && model.intensity.is_atomic();
    if (cfg.val_laplace && atomic) {
        add("laplace_constant",
            laplace_functional_test(ens, model, [](double, double) { return 0.5; }, z));
        add("laplace_time", laplace_functional_test(
                                ens, model, [](double t, double) { return 0.3 * (1.0 + t); }, z));
        add("laplace_mark",
            laplace_functional_test(
                ens, model, [](double t, double e) { return 0.2 * std::abs(e) + 0.1 * t; }, z));
    }
    if (cfg.val_counts && atomic) {
        const int P = ens.n_paths, K = ens.grid.steps, q = ens.dim_a;
        const double dt = ens.grid.dt();
        // Compensated count: jump count minus the integrated intensity is a
        // mean-zero martingale evaluated at the horizon.
        std::vector<double> comp(size_t(P), 0.0);
        std::vector<double> I(size_t(q), 0.0);
        for (int p = 0; p < P; ++p) {
            double c = double(ens.jumps[size_t(p)].size());
            for (int k = 0; k < K; ++k) {
                surjection_h(&ens.w[size_t(k)][size_t(p) * size_t(q)], model.control_set,
                             I.data());
                c -= dt * model.intensity.total_rate(I.data());
            }
            comp[size_t(p)] = c;
        }
        double mean = 0.0;
        for (double v : comp) mean += v;
        mean /= double(P);
        double var = 0.0;
        for (double v : comp) var += (v - mean) * (v - mean);
        var /= double(std::max(P - 1, 1));
        add("compensated_count", make_stat_report(mean, std::sqrt(var / P), P, z));

        double rate = 0.0;
        if (constant_rate(model, &rate)) {
            std::vector<int> counts(size_t(P), 0);
            for (int p = 0; p < P; ++p) counts[size_t(p)] = int(ens.jumps[size_t(p)].size());
            const auto gof =
                chi_square_gof_poisson(counts, rate * (ens.grid.t1 - ens.grid.t0), 0.001);
            add("counts_poisson_gof", gof);
        }
    }
    if (cfg.val_martingale && sol != nullptr)
        add("martingale_residual", martingale_residual_test(*sol, ens, model, z));
    return out;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SolverOptions solver_options(const ExperimentConfig& cfg) {
    SolverOptions opts;
    opts.smoothing = cfg.smoothing;
    opts.debias = cfg.debias;
    opts.workers = cfg.workers;
    return opts;
}

std::vector<double> auto_penalties(const ExperimentConfig& cfg, const ControlledModel& model) {
    const double span = model.horizon - cfg.t;
    const double dt = span / cfg.steps;
    std::vector<double> out;
    for (int i = 0; i < 5; ++i) {
        const double n = std::pow(2.0, i) / span;
        if (n * dt <= 1.0 + 1e-12) out.push_back(n);
    }
    return out;
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                        int line) {
    if (key == "model") cfg.model_name = value;
    else if (key == "t") cfg.t = parse_double(key, value, line);
    else if (key == "x") cfg.x = parse_list(key, value, line);
    else if (key == "anchor") cfg.anchor = parse_list(key, value, line);
    else if (key == "grid.steps") cfg.steps = int(parse_long(key, value, line));
    else if (key == "bsde.n_paths") cfg.n_paths = parse_long(key, value, line);
    else if (key == "bsde.penalty") cfg.penalty = parse_double(key, value, line);
    else if (key == "bsde.penalties") cfg.penalties = parse_list(key, value, line);
    else if (key == "bsde.interior_probes") cfg.interior_probes = int(parse_long(key, value, line));
    else if (key == "bsde.smoothing") cfg.smoothing = parse_double(key, value, line);
    else if (key == "bsde.debias") cfg.debias = parse_bool(key, value, line);
    else if (key == "bsde.workers") cfg.workers = int(parse_long(key, value, line));
    else if (key == "basis.kind") {
        try {
            cfg.basis.kind = BasisSpec::parse_kind(value);
        } catch (const std::exception&) {
            bad_config(line, "unknown basis kind '" + value + "'");
        }
    } else if (key == "basis.degree") cfg.basis.degree = int(parse_long(key, value, line));
    else if (key == "basis.cells") cfg.basis.cells_per_dim = int(parse_long(key, value, line));
    else if (key == "basis.min_cell_occupancy")
        cfg.basis.min_cell_occupancy = int(parse_long(key, value, line));
    else if (key == "seed") cfg.master_seed = uint64_t(parse_long(key, value, line));
    else if (key == "output") cfg.output = value;
    else if (key == "dump_paths") cfg.dump_paths = parse_bool(key, value, line);
    else if (key == "fd.x_min") { cfg.fd.x_min = parse_double(key, value, line); cfg.fd_bounds_set = true; }
    else if (key == "fd.x_max") { cfg.fd.x_max = parse_double(key, value, line); cfg.fd_bounds_set = true; }
    else if (key == "fd.nodes") cfg.fd.nodes = int(parse_long(key, value, line));
    else if (key == "fd.time_steps") cfg.fd.time_steps = int(parse_long(key, value, line));
    else if (key == "fd.control_nodes") cfg.fd.control_nodes = int(parse_long(key, value, line));
    else if (key == "fd.delta") cfg.fd.delta_split = parse_double(key, value, line);
    else if (key == "fd.margin") cfg.fd.extrapolation_margin = parse_double(key, value, line);
    else if (key == "fd.probes") cfg.fd_probes = parse_list(key, value, line);
    else if (key == "validation.laplace") cfg.val_laplace = parse_bool(key, value, line);
    else if (key == "validation.martingale") cfg.val_martingale = parse_bool(key, value, line);
    else if (key == "validation.counts") cfg.val_counts = parse_bool(key, value, line);
    else if (key == "validation.assumptions") cfg.val_assumptions = parse_bool(key, value, line);
    else if (key == "validation.threshold") cfg.val_threshold = parse_double(key, value, line);
    else bad_config(line, "unknown key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) bad_config(line, "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) bad_config(line, "empty key");
        apply_config_entry(cfg, key, value, line);
    }
    return cfg;
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (const char* env = std::getenv("RCBSDE_OUT"); env != nullptr && *env != '\0') return env;
    return cfg.output;
}

int run_solve(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto t_start = std::chrono::steady_clock::now();
    const ControlledModel model = resolved_model(cfg);
    const std::vector<double> x = cfg.x.empty() ? default_x(model) : cfg.x;
    TimeGrid grid{cfg.t, model.horizon, cfg.steps};
    const SolverOptions opts = solver_options(cfg);

    fs::create_directories(out_dir);
    Json result;
    result["model"] = model.name;
    result["t"] = cfg.t;
    result["x"] = x;
    result["penalty"] = cfg.penalty;

    const bool wants_suite =
        cfg.val_laplace || cfg.val_martingale || cfg.val_counts || cfg.val_assumptions;
    bool all_pass = true;
    Json validation;
    double solve_seconds = 0.0, validation_seconds = 0.0;

    if (!cfg.anchor.empty()) {
        // Explicitly anchored run: one ensemble, one backward pass.
        const PathEnsemble ens =
            simulate_ensemble(model, grid, int(cfg.n_paths), x, cfg.anchor, cfg.master_seed,
                              cfg.workers);
        const BsdeSolution sol = backward_solve(model, ens, cfg.basis, cfg.penalty, opts);
        solve_seconds = seconds_since(t_start);
        result["value"] = sol.value;
        result["std_error"] = sol.value_stderr;
        result["a_spread"] = 0.0;
        result["constraint_norm"] = sol.constraint;
        result["anchor"] = cfg.anchor;
        if (wants_suite) {
            const auto t_val = std::chrono::steady_clock::now();
            validation = validation_suite(model, cfg, ens, &sol, log, &all_pass);
            validation_seconds = seconds_since(t_val);
        }
        if (cfg.dump_paths) write_paths_csv(fs::path(out_dir) / "paths.csv", model, ens);
    } else {
        const ValueEstimate est = value_at(model, cfg.t, x, grid, int(cfg.n_paths), cfg.basis,
                                           cfg.penalty, cfg.interior_probes, cfg.master_seed,
                                           opts);
        solve_seconds = seconds_since(t_start);
        result["value"] = est.value;
        result["std_error"] = est.stderr_value;
        result["a_spread"] = est.a_spread;
        if (wants_suite || cfg.dump_paths) {
            // One extra ensemble at the ball center backs the property tests.
            const auto t_val = std::chrono::steady_clock::now();
            const PathEnsemble ens =
                simulate_ensemble(model, grid, int(cfg.n_paths), x, model.control_set.center,
                                  cfg.master_seed, cfg.workers);
            if (wants_suite) {
                const BsdeSolution sol = backward_solve(model, ens, cfg.basis, cfg.penalty, opts);
                result["constraint_norm"] = sol.constraint;
                validation = validation_suite(model, cfg, ens, &sol, log, &all_pass);
            }
            validation_seconds = seconds_since(t_val);
            if (cfg.dump_paths) write_paths_csv(fs::path(out_dir) / "paths.csv", model, ens);
        }
    }

    Json report;
    report["command"] = "solve";
    report["config"] = config_json(cfg);
    report["result"] = result;
    if (wants_suite) report["validation"] = validation;
    report["timings"] = Json{{"solve_seconds", solve_seconds},
                             {"validation_seconds", validation_seconds},
                             {"total_seconds", seconds_since(t_start)}};
    write_json(fs::path(out_dir) / "solve_report.json", report);

    log << "solve: model=" << model.name << " value=" << result["value"].get<double>()
        << " +/- " << result["std_error"].get<double>() << " (report in " << out_dir << ")\n";
    return all_pass ? 0 : 2;
}

int run_sweep(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto t_start = std::chrono::steady_clock::now();
    const ControlledModel model = resolved_model(cfg);
    const std::vector<double> x = cfg.x.empty() ? default_x(model) : cfg.x;
    TimeGrid grid{cfg.t, model.horizon, cfg.steps};
    const std::vector<double> penalties =
        cfg.penalties.empty() ? auto_penalties(cfg, model) : cfg.penalties;
    if (penalties.size() < 2) throw ConfigError("config: need at least two penalties to sweep");

    const PenaltySweepReport rep =
        penalty_sweep(model, cfg.t, x, grid, int(cfg.n_paths), cfg.basis, penalties,
                      cfg.interior_probes, cfg.master_seed, solver_options(cfg));
    const SweepDiagnostics diag = sweep_diagnostics(rep, 0.03, -0.5);

    fs::create_directories(out_dir);
    // The sweep document proper: field names are a stable external interface.
    Json sweep;
    sweep["model"] = model.name;
    sweep["grid"] = Json{{"t0", grid.t0}, {"t1", grid.t1}, {"steps", grid.steps}};
    sweep["penalties"] = rep.penalties;
    sweep["values"] = rep.values;
    sweep["stderr"] = rep.stderrs;
    sweep["constraint_norms"] = rep.constraint_norms;
    sweep["a_spreads"] = rep.a_spreads;
    sweep["seed"] = cfg.master_seed;
    write_json(fs::path(out_dir) / "sweep.json", sweep);

    {
        std::ofstream csv(fs::path(out_dir) / "sweep.csv");
        csv << "penalty,value,stderr,constraint_norm,a_spread\n";
        csv.precision(17);
        for (size_t i = 0; i < rep.penalties.size(); ++i)
            csv << rep.penalties[i] << ',' << rep.values[i] << ',' << rep.stderrs[i] << ','
                << rep.constraint_norms[i] << ',' << rep.a_spreads[i] << '\n';
    }

    Json validation;
    validation["monotone"] = diag.monotone;
    validation["constraint_decaying"] = diag.constraint_decaying;
    validation["a_independent"] = diag.a_independent;
    validation["constraint_slope"] = diag.constraint_slope;
    validation["final_spread_fraction"] = diag.final_spread_fraction;
    validation["monotone_flags"] = rep.monotone_flags;

    Json report;
    report["command"] = "sweep";
    report["config"] = config_json(cfg);
    report["result"] = sweep;
    report["validation"] = validation;
    report["timings"] = Json{{"total_seconds", seconds_since(t_start)}};
    write_json(fs::path(out_dir) / "sweep_report.json", report);

    for (size_t i = 0; i < rep.penalties.size(); ++i)
        log << "sweep: n=" << rep.penalties[i] << " value=" << rep.values[i]
            << " F=" << rep.constraint_norms[i] << " spread=" << rep.a_spreads[i] << "\n";
    log << "sweep: monotone=" << diag.monotone << " slope=" << diag.constraint_slope
        << " a_independent=" << diag.a_independent << "\n";
    return diag.all() ? 0 : 2;
}

int run_reference(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto t_start = std::chrono::steady_clock::now();
    ControlledModel model = resolved_model(cfg);
    const double t = cfg.t;
    model.horizon -= t;  // march only the remaining horizon
    FdGrid fdg = cfg.fd;
    if (!cfg.fd_bounds_set) default_fd_bounds(model, fdg);

    const FdSolution sol = solve_hjb_fd(model, fdg);
    fs::create_directories(out_dir);
    write_fd_csv(fs::path(out_dir) / "fd.csv", t, sol);

    const std::vector<double> probes = cfg.fd_probes.empty()
                                           ? (cfg.x.empty() ? default_x(model) : cfg.x)
                                           : cfg.fd_probes;
    Json rows = Json::array();
    for (double px : probes) {
        const double fd_value = sol.value_at(px);
        const double oracle = oracle_value(model, 0.0, px);
        Json row;
        row["x"] = px;
        row["fd_value"] = fd_value;
        row["oracle_value"] = oracle;
        if (std::isfinite(oracle) && oracle != 0.0)
            row["rel_error"] = (fd_value - oracle) / std::abs(oracle);
        rows.push_back(row);
        log << "reference: x=" << px << " fd=" << fd_value << " oracle=" << oracle << "\n";
    }

    Json report;
    report["command"] = "reference";
    report["config"] = config_json(cfg);
    report["result"] = Json{{"nodes", fdg.nodes},
                            {"time_steps", sol.time_steps},
                            {"csv", "fd.csv"},
                            {"comparison", rows}};
    report["timings"] = Json{{"total_seconds", seconds_since(t_start)}};
    write_json(fs::path(out_dir) / "reference_report.json", report);
    return 0;
}

int run_validate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto t_start = std::chrono::steady_clock::now();
    const ControlledModel model = resolved_model(cfg);
    const std::vector<double> x = cfg.x.empty() ? default_x(model) : cfg.x;
    TimeGrid grid{cfg.t, model.horizon, cfg.steps};
    const std::vector<double> anchor = cfg.anchor.empty() ? model.control_set.center : cfg.anchor;

    const PathEnsemble ens =
        simulate_ensemble(model, grid, int(cfg.n_paths), x, anchor, cfg.master_seed, cfg.workers);
    BsdeSolution sol;
    const BsdeSolution* sol_ptr = nullptr;
    if (cfg.val_martingale) {
        sol = backward_solve(model, ens, cfg.basis, cfg.penalty, solver_options(cfg));
        sol_ptr = &sol;
    }
    bool all_pass = true;
    const Json validation = validation_suite(model, cfg, ens, sol_ptr, log, &all_pass);

    fs::create_directories(out_dir);
    Json report;
    report["command"] = "validate";
    report["config"] = config_json(cfg);
    report["validation"] = validation;
    report["timings"] = Json{{"total_seconds", seconds_since(t_start)}};
    write_json(fs::path(out_dir) / "validate_report.json", report);

    log << "validate: " << (all_pass ? "all tests passed" : "FAILURES present") << "\n";
    return all_pass ? 0 : 2;
}

}  // namespace rcbsde
