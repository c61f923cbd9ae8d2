#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcbsde {

// Control sets are closed balls; the surjection h of the control
// randomization maps all of R^q onto the ball with a C^2 quintic radial
// profile, constant beyond the unit radius.
struct ControlSet {
    std::vector<double> center;
    double radius = 1.0;

    int dim() const { return int(center.size()); }
};

// Quintic radial profile s(rho) = 6 rho^5 - 15 rho^4 + 10 rho^3 on [0,1],
// clamped to 1 beyond; s(0)=0, s(1)=1, s'(1)=s''(1)=0.
double radial_profile(double rho);

void surjection_h(const double* a, const ControlSet& set, double* out);
std::vector<double> surjection_h(const std::vector<double>& a, const ControlSet& set);
double surjection_h1(double a, const ControlSet& set);  // q = 1 convenience

// Inverse of h on the open ball (bisection on the radial profile).
// Throws std::invalid_argument("not in open ball") on targets outside.
std::vector<double> surjection_preimage(const std::vector<double>& y, const ControlSet& set);

struct Atom {
    double mark;
    double weight;
};

// Finite-activity intensity kernel. `atoms` returns the kernel's finite mark
// list at a given control (empty when the kernel is not atomic); the list may
// move with the control, which covers kernels like delta_{h(a)}.
struct IntensityKernel {
    std::function<double(const double* a)> total_rate;
    std::function<double(const double* a, double u01)> mark_sampler;
    double rate_bound = 1.0;
    std::function<std::vector<Atom>(const double* a)> atoms;  // may be null

    bool is_atomic() const { return bool(atoms); }
};

// All problem data: coefficients, intensity kernel, costs, control set.
// Coefficient callbacks write into caller-provided buffers (row-major for the
// diffusion matrix). Immutable after construction; safe for concurrent reads.
struct ControlledModel {
    int dim_x = 1;
    int dim_a = 1;
    double horizon = 1.0;
    std::function<void(const double* x, const double* a, double* out)> drift;
    std::function<void(const double* x, const double* a, double* out)> diffusion;
    std::function<void(const double* x, const double* a, double mark, double* out)> jump_size;
    IntensityKernel intensity;
    std::function<double(const double* x, const double* a)> running_cost;
    std::function<double(const double* x)> terminal_cost;
    ControlSet control_set;
    std::string name = "custom";

    bool has_jumps() const { return bool(jump_size) && intensity.rate_bound > 0.0; }
};

// Built-in benchmark models addressable by name from the CLI:
//   "uvm"               - uncertain volatility, sigma(x,a) = h(a)*x with
//                         vol ball [0.1, 0.3], call payoff at strike 100
//   "nondominated-jump" - pure jump, beta(x,a,e) = e, lambda(a,.) = unit-rate
//                         delta at h(a), ball [0.5, 1.5], g(x) = |x|
//   "trivial-drift"     - b = 1, sigma = 0, no jumps, g(x) = x
ControlledModel make_benchmark(const std::string& name);

struct AssumptionReport {
    double lipschitz_b = 0.0;
    double lipschitz_sigma = 0.0;
    double lipschitz_beta = 0.0;
    double growth_g = 0.0;
    double max_rate_seen = 0.0;
    bool lipschitz_flag = false;
    bool growth_flag = false;
    bool rate_flag = false;

    bool all_clear() const { return !lipschitz_flag && !growth_flag && !rate_flag; }
};

struct ValidateOptions {
    double x_range = 10.0;      // coefficients sampled on [-x_range, x_range]^d around 0
    double lipschitz_cap = 50.0;
    double growth_cap = 50.0;
};

// Statistical spot check of the standing regularity assumptions: empirical
// Lipschitz ratios over random pairs, growth of g, and the intensity bound.
// Reports only; never throws.
AssumptionReport validate_model(const ControlledModel& model, int budget, uint64_t seed,
                                const ValidateOptions& opts = {});

}  // namespace rcbsde
