#pragma once

#include <cstdint>
#include <vector>

#include "rcbsde/model.hpp"
#include "rcbsde/rng.hpp"

namespace rcbsde {

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int steps = 50;

    double dt() const { return (t1 - t0) / steps; }
    double time_at(int k) const { return t0 + k * dt(); }
};

struct JumpEvent {
    int step;
    double time;
    double mark;
};

// Simulated forward system. Increment arrays are laid out per step as
// [path*dim + component]; state arrays have steps+1 slices. The control
// process I is not materialized: I_{t_k} = h(w_k) is recomputed where needed.
struct PathEnsemble {
    TimeGrid grid;
    int n_paths = 0;
    int dim_x = 1;
    int dim_a = 1;
    uint64_t master_seed = 0;
    std::vector<double> anchor;                  // a, the randomization start point
    std::vector<std::vector<double>> dW;         // steps x (n_paths*dim_x)
    std::vector<std::vector<double>> dB;         // steps x (n_paths*dim_a)
    std::vector<std::vector<double>> w;          // steps+1 x (n_paths*dim_a), w = a + B
    std::vector<std::vector<double>> X;          // steps+1 x (n_paths*dim_x)
    std::vector<std::vector<JumpEvent>> jumps;   // per path, time-ordered
};

// Gaussian increments with variance dt per component, fully determined by
// (master_seed, purpose, path, step) regardless of worker count.
std::vector<std::vector<double>> simulate_brownians(const TimeGrid& grid, int n_paths, int dims,
                                                    uint64_t master_seed,
                                                    rng::Purpose purpose, int workers = 1);

// w_k = a + sum_{j<k} dB_j and I_k = h(w_k).
std::vector<std::vector<double>> accumulate_anchor(const std::vector<double>& anchor,
                                                   const std::vector<std::vector<double>>& dB,
                                                   int n_paths, int dim_a, int workers = 1);
std::vector<double> simulate_I(const std::vector<double>& anchor,
                               const std::vector<std::vector<double>>& dB, int path,
                               const ControlSet& set);

// Thinning against the kernel's majorant rate: homogeneous candidates at
// rate_bound, accepted with probability total_rate(I)/rate_bound using the
// grid-step value of I. Throws std::runtime_error("majorant violated (path N)")
// when the bound fails.
std::vector<std::vector<JumpEvent>> simulate_cox_thinning(
    const ControlledModel& model, const std::vector<std::vector<double>>& w, int n_paths,
    const TimeGrid& grid, uint64_t master_seed, int workers = 1);

// Euler scheme with compensated jumps: the compensator drift is exact for
// atomic kernels and a fixed-size Monte Carlo average otherwise. Jump sizes
// are evaluated at the step's opening state. Throws on non-finite values.
std::vector<std::vector<double>> simulate_X_euler(const ControlledModel& model,
                                                  const std::vector<double>& x0,
                                                  const PathEnsemble& ensemble,
                                                  int compensator_samples = 16, int workers = 1);

// Full forward build: brownians, w, jumps, X.
PathEnsemble simulate_ensemble(const ControlledModel& model, const TimeGrid& grid, int n_paths,
                               const std::vector<double>& x0, const std::vector<double>& anchor,
                               uint64_t master_seed, int workers = 1);

}  // namespace rcbsde
