#pragma once

#include <functional>
#include <vector>

#include "rcbsde/bsde.hpp"
#include "rcbsde/forward.hpp"
#include "rcbsde/model.hpp"

namespace rcbsde {

// Shared shape for the statistical property tests. pass <=> |z_score| is
// within threshold.
struct StatTestReport {
    double statistic = 0.0;
    double std_error = 0.0;
    double z_score = 0.0;
    double threshold = 4.0;
    bool pass = true;
    long n_samples = 0;
};

StatTestReport make_stat_report(double statistic, double std_error, long n_samples,
                                double threshold = 4.0);

// Nonnegative functional of (time, mark); treated as constant on each grid
// step in time, so the grid-level exponential identity is exact.
using MarkTimeFn = std::function<double(double time, double mark)>;

// Cox-measure Laplace functional: per path,
//   M = exp(-sum_jumps ell(t_k, e)) * exp(+sum_k dt sum_atoms (1-e^{-ell}) w),
// which has mean exactly 1 conditionally on the intensity path. Requires an
// atomic kernel (the mark integral is evaluated exactly).
StatTestReport laplace_functional_test(const PathEnsemble& ensemble, const ControlledModel& model,
                                       const MarkTimeFn& ell, double threshold = 4.0);

// Discrete martingale-representation residuals: per step,
//   rho_k = Y_{k+1} - fitted_k - Z_k dW_k - V_k dB_k,
// where fitted_k is recovered from the stored recursion. Reports the worst
// z-score over per-step means and over path functionals sum_k rho_k phi(X_k)
// with phi in {1, x, g(x)}; each mean is tested against the no-cancellation
// scale of its components, which stays calibrated when the fitted Z and V
// are evaluated in-sample.
StatTestReport martingale_residual_test(const BsdeSolution& sol, const PathEnsemble& ensemble,
                                        const ControlledModel& model, double threshold = 4.0);

// Limit diagnostics extracted from a penalty sweep: value monotonicity,
// log-log decay of the constraint norm, anchor-independence of the value.
struct SweepDiagnostics {
    bool monotone = false;
    bool constraint_decaying = false;
    bool a_independent = false;
    double constraint_slope = 0.0;        // least-squares slope of log F vs log n
    double final_spread_fraction = 0.0;   // a_spread / |value| at the largest n
    bool all() const { return monotone && constraint_decaying && a_independent; }
};

SweepDiagnostics sweep_diagnostics(const PenaltySweepReport& report,
                                   double spread_fraction = 0.03, double slope_cap = -0.5);

// Chi-square goodness of fit of nonnegative integer counts against a Poisson
// law, tail bins merged until every expected count is at least 5. The z-score
// is the normal quantile of the exact p-value, so the default threshold
// corresponds to a two-sided significance of about 1e-3.
StatTestReport chi_square_gof_poisson(const std::vector<int>& counts, double lambda,
                                      double significance = 0.001);

double chi_square_pvalue(double statistic, int dof);  // upper tail
double normal_quantile(double p);

}  // namespace rcbsde
