#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcbsde/bsde.hpp"
#include "rcbsde/reference.hpp"
#include "rcbsde/regression.hpp"

namespace rcbsde {

// Configuration problems carry a line-numbered message and map to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key/value experiment description (dotted section keys). Every field
// has a default, so a config file only states what it changes.
struct ExperimentConfig {
    std::string model_name = "uvm";
    double t = 0.0;
    std::vector<double> x;       // empty: model-specific probe point
    std::vector<double> anchor;  // empty: control-ball center
    int steps = 50;
    long n_paths = 20000;
    double penalty = 5.0;            // single-n solve
    std::vector<double> penalties;   // sweep; empty: auto doubling schedule
    int interior_probes = 5;
    double smoothing = 2.0;
    bool debias = true;
    int workers = 1;
    BasisSpec basis{BasisKind::cellpoly};
    uint64_t master_seed = 1;
    std::string output = "runs";
    bool dump_paths = false;

    FdGrid fd;
    bool fd_bounds_set = false;      // x_min/x_max given explicitly
    std::vector<double> fd_probes;   // empty: model-specific probe point

    bool val_laplace = true;
    bool val_martingale = true;
    bool val_counts = true;
    bool val_assumptions = true;
    double val_threshold = 4.0;
};

// Parse a config file; unknown keys and malformed values throw ConfigError
// with the offending line number.
ExperimentConfig parse_config_file(const std::string& path);

// Apply one "key=value" pair (CLI override); throws ConfigError on bad keys.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                        int line = 0);

// Resolve the effective output directory: --out override beats the
// RCBSDE_OUT environment variable beats the config value.
std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& cli_out);

// Subcommand drivers. Each writes a JSON report (plus CSV side files) into
// the output directory and returns the process exit code: 0 success,
// 2 solver/validation failure. Config errors throw ConfigError (exit 1).
int run_solve(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int run_sweep(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int run_reference(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int run_validate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

}  // namespace rcbsde
