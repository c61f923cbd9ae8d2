#pragma once

#include <cstdint>
#include <vector>

#include "rcbsde/forward.hpp"
#include "rcbsde/model.hpp"
#include "rcbsde/regression.hpp"

namespace rcbsde {

// Variance controls for the backward regressions. Targets are centered at the
// fitted conditional mean; the diffusion and jump control variates strip the
// parts of the one-step martingale noise that the fitted value function
// explains. The penalty magnitude is smoothed at the regression-noise scale
// (pointwise HC0) and debiased, so an exactly representable V = 0 still
// yields a zero penalty.
struct SolverOptions {
    bool z_control_variate = true;
    bool jump_control_variate = true;     // needs an atomic kernel
    double smoothing = 2.0;               // mu = smoothing * noise_scale
    bool debias = true;                   // |V| <- sqrt(max(V^2 - s^2, 0))
    int workers = 1;
};

struct BsdeSolution {
    TimeGrid grid;
    double penalty_n = 0.0;
    // Per-step slices, laid out like the ensemble arrays.
    std::vector<std::vector<double>> Y;             // steps+1 x n_paths
    std::vector<std::vector<double>> Z;             // steps x (n_paths*dim_x)
    std::vector<std::vector<double>> V;             // steps x (n_paths*dim_a)
    std::vector<std::vector<double>> K_increments;  // steps x n_paths
    double value = 0.0;        // fitted Y at step 0 (common start point)
    double value_stderr = 0.0;
    double constraint = 0.0;   // F = mean of sum_k mag(V_k) dt
};

// Discrete penalized backward scheme:
//   Y_K = g(X_T);  for k = K-1 .. 0:
//     Z_k = (1/dt) fit(Y_{k+1} dW_k),  V_k = (1/dt) fit(Y_{k+1} dB_k),
//     Y_k = fit(Y_{k+1}) + f(X_k, I_k) dt + penalty_n |V_k| dt.
// Throws "penalty violates step bound" when penalty_n * dt > 1.
BsdeSolution backward_solve(const ControlledModel& model, const PathEnsemble& ensemble,
                            const BasisSpec& basis, double penalty_n,
                            const SolverOptions& opts = {});

// F(V) = sample mean of sum_k mag(V_k) dt; equals mean(K_T)/penalty_n when
// penalty_n > 0.
double constraint_violation(const BsdeSolution& sol);

struct PenaltySweepReport {
    std::vector<double> penalties;
    std::vector<double> values;
    std::vector<double> stderrs;
    std::vector<double> constraint_norms;
    std::vector<double> a_spreads;
    std::vector<bool> monotone_flags;  // values[i+1] >= values[i] - 2*combined SE
};

// One forward ensemble per interior probe anchor, reused across every penalty
// (common random numbers). Values and spreads are averaged/spread over the
// anchor set; anchors are drawn at radius <= r/2 inside the control ball.
PenaltySweepReport penalty_sweep(const ControlledModel& model, double t,
                                 const std::vector<double>& x, const TimeGrid& grid, int n_paths,
                                 const BasisSpec& basis, const std::vector<double>& penalties,
                                 int interior_probe_count, uint64_t master_seed,
                                 const SolverOptions& opts = {});

struct ValueEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
    double a_spread = 0.0;
};

// Value function estimate at (t, x): mean over interior anchors of the
// penalized value at penalty_max, with the anchor spread as a quality gate.
ValueEstimate value_at(const ControlledModel& model, double t, const std::vector<double>& x,
                       const TimeGrid& grid, int n_paths, const BasisSpec& basis,
                       double penalty_max, int interior_probe_count, uint64_t master_seed,
                       const SolverOptions& opts = {});

// Interior probe anchors for the a-independence diagnostics.
std::vector<std::vector<double>> interior_anchors(const ControlSet& set, int count,
                                                  uint64_t master_seed);

}  // namespace rcbsde
