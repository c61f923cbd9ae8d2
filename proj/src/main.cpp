#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rcbsde/harness.hpp"

namespace {

struct CommonArgs {
    std::string config, out, model, penalties;
    std::string seed, paths, steps, workers;
    bool dump_paths = false;
};

void add_common(CLI::App* sub, CommonArgs& c) {
    sub->add_option("--config", c.config, "experiment config file (key = value lines)");
    sub->add_option("--seed", c.seed, "master seed override");
    sub->add_option("--paths", c.paths, "Monte Carlo path count override");
    sub->add_option("--steps", c.steps, "time grid step count override");
    sub->add_option("--out", c.out, "output directory override");
    sub->add_option("--model", c.model, "benchmark model override");
    sub->add_option("--penalties", c.penalties, "comma-separated penalty levels");
    sub->add_option("--workers", c.workers, "worker thread count");
    sub->add_flag("--dump-paths", c.dump_paths, "write a per-path CSV dump");
}

rcbsde::ExperimentConfig build_config(const CommonArgs& c) {
    rcbsde::ExperimentConfig cfg =
        c.config.empty() ? rcbsde::ExperimentConfig{} : rcbsde::parse_config_file(c.config);
    if (!c.seed.empty()) rcbsde::apply_config_entry(cfg, "seed", c.seed);
    if (!c.paths.empty()) rcbsde::apply_config_entry(cfg, "bsde.n_paths", c.paths);
    if (!c.steps.empty()) rcbsde::apply_config_entry(cfg, "grid.steps", c.steps);
    if (!c.model.empty()) rcbsde::apply_config_entry(cfg, "model", c.model);
    if (!c.workers.empty()) rcbsde::apply_config_entry(cfg, "bsde.workers", c.workers);
    if (!c.penalties.empty()) {
        rcbsde::apply_config_entry(cfg, "bsde.penalties", c.penalties);
        cfg.penalty = cfg.penalties.back();  // single-n commands use the largest
    }
    if (c.dump_paths) cfg.dump_paths = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized-BSDE solver for HJB equations with controlled jump intensity"};
    app.require_subcommand(1);

    CommonArgs solve_args, sweep_args, ref_args, val_args;
    CLI::App* solve = app.add_subcommand("solve", "estimate the value at (t, x)");
    CLI::App* sweep = app.add_subcommand("sweep", "run a penalty sweep with limit diagnostics");
    CLI::App* reference =
        app.add_subcommand("reference", "1-D finite-difference reference and oracle comparison");
    CLI::App* validate = app.add_subcommand("validate", "statistical property suite");
    add_common(solve, solve_args);
    add_common(sweep, sweep_args);
    add_common(reference, ref_args);
    add_common(validate, val_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const auto cfg = build_config(solve_args);
            return rcbsde::run_solve(cfg, rcbsde::resolve_output_dir(cfg, solve_args.out),
                                     std::cout);
        }
        if (sweep->parsed()) {
            const auto cfg = build_config(sweep_args);
            return rcbsde::run_sweep(cfg, rcbsde::resolve_output_dir(cfg, sweep_args.out),
                                     std::cout);
        }
        if (reference->parsed()) {
            const auto cfg = build_config(ref_args);
            return rcbsde::run_reference(cfg, rcbsde::resolve_output_dir(cfg, ref_args.out),
                                         std::cout);
        }
        const auto cfg = build_config(val_args);
        return rcbsde::run_validate(cfg, rcbsde::resolve_output_dir(cfg, val_args.out), std::cout);
    } catch (const rcbsde::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
