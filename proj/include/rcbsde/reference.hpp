#pragma once

#include <functional>
#include <vector>

#include "rcbsde/model.hpp"

namespace rcbsde {

struct FdGrid {
    double x_min = -1.0;
    double x_max = 1.0;
    int nodes = 401;
    int time_steps = 0;       // 0: pick automatically from the CFL bound
    int control_nodes = 11;   // uniform grid over the 1-D control interval
    double delta_split = 0.0; // marks with |e| <= delta go through the Taylor term
    double extrapolation_margin = 0.5;  // fraction of domain width

    double dx() const { return (x_max - x_min) / (nodes - 1); }
};

struct FdSolution {
    FdGrid grid;
    double horizon = 0.0;
    int time_steps = 0;
    std::vector<double> x;         // nodes
    std::vector<double> terminal;  // g on nodes
    std::vector<double> values;    // u(0, x) on nodes

    double value_at(double xq) const;  // linear interpolation
};

// Explicit monotone finite-difference solver for the 1-D HJB IPDE with an
// atomic intensity kernel:
//   -u_t - sup_a { b u_x + (sigma^2/2) u_xx + I[u](x, a) + f } = 0, u(T) = g.
// Small marks (|e| <= delta) enter through a second-order Taylor surrogate
// folded into the diffusion; large marks are evaluated directly by linear
// interpolation (linear extrapolation within the configured margin).
// Throws "CFL" when the step count violates the monotonicity bound, and
// "domain too small" when jumps land beyond the extrapolation margin.
FdSolution solve_hjb_fd(const ControlledModel& model, const FdGrid& grid);

// Black-Scholes call at zero rate.
double bs_closed_form(double spot, double strike, double maturity, double vol);

// E[g(x + a(N - rate*horizon))], N ~ Poisson(rate*horizon), by direct series
// summation. Throws "increase truncation" when the Poisson tail mass at
// truncation_terms is >= 1e-12.
double poisson_series_value(double x, double jump_size, double rate, double horizon,
                            const std::function<double(double)>& g, int truncation_terms = 64);

}  // namespace rcbsde
