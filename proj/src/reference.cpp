#include "rcbsde/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcbsde {

double FdSolution::value_at(double xq) const {
    if (x.empty()) return 0.0;
    if (xq <= x.front()) return values.front();
    if (xq >= x.back()) return values.back();
    const double dx = x[1] - x[0];
    const size_t j = std::min(size_t((xq - x.front()) / dx), x.size() - 2);
    const double frac = (xq - x[j]) / dx;
    return (1.0 - frac) * values[j] + frac * values[j + 1];
}

namespace {

// Interpolation stencil for one jump destination: destination value is
// lo_w * u[idx] + hi_w * u[idx+1] (+ extrapolation beyond the boundary).
struct Stencil {
    int idx;
    double lo_w, hi_w;
};

Stencil destination_stencil(double dest, double x_min, double dx, int nodes, double margin_width) {
    const double x_max = x_min + dx * (nodes - 1);
    if (dest < x_min - margin_width || dest > x_max + margin_width)
        throw std::runtime_error("domain too small");
    double pos = (dest - x_min) / dx;
    // Linear extrapolation re-uses the boundary cell's slope.
    pos = std::clamp(pos, -double(nodes), 2.0 * nodes);  // keep idx arithmetic safe
    int idx = int(std::floor(pos));
    idx = std::clamp(idx, 0, nodes - 2);
    const double frac = pos - idx;
    return {idx, 1.0 - frac, frac};
}

}  // namespace

FdSolution solve_hjb_fd(const ControlledModel& model, const FdGrid& grid) {
    if (model.dim_x != 1 || model.dim_a != 1)
        throw std::invalid_argument("FD reference is 1-D only");
    if (model.has_jumps() && !model.intensity.is_atomic())
        throw std::invalid_argument("FD reference needs an atomic kernel");
    if (grid.nodes < 3) throw std::invalid_argument("need at least 3 nodes");

    const int N = grid.nodes;
    const double dx = grid.dx();
    const double T = model.horizon;
    const double margin_width = grid.extrapolation_margin * (grid.x_max - grid.x_min);

    std::vector<double> x(size_t(N), 0.0);
    for (int j = 0; j < N; ++j) x[size_t(j)] = grid.x_min + j * dx;

    // Control grid over the 1-D projection of the ball.
    const double c = model.control_set.center[0], r = model.control_set.radius;
    const int na = std::max(grid.control_nodes, 1);
    std::vector<double> a_grid(size_t(na), 0.0);
    for (int i = 0; i < na; ++i)
        a_grid[size_t(i)] = na == 1 ? c : c - r + 2.0 * r * i / (na - 1);

    // Per-control precomputation: effective drift (with the large-mark
    // compensator folded in), effective diffusion (with the small-mark Taylor
    // surrogate), direct-jump stencils, running cost.
    struct ControlData {
        std::vector<double> b_eff, sig2_eff, fcost;
        std::vector<double> jump_weight;          // per atom (large marks only)
        std::vector<std::vector<Stencil>> jump_to; // [atom][node]
        double lambda_direct = 0.0;
    };
    auto per_a = std::vector<ControlData>(size_t(na));
    double cfl_bound = 0.0;

    for (int i = 0; i < na; ++i) {
        ControlData& cd = per_a[size_t(i)];
        cd.b_eff.resize(size_t(N));
        cd.sig2_eff.resize(size_t(N));
        cd.fcost.resize(size_t(N));
        const double a = a_grid[size_t(i)];
        std::vector<Atom> atoms;
        if (model.has_jumps()) atoms = model.intensity.atoms(&a);
        std::vector<size_t> large;
        for (size_t t = 0; t < atoms.size(); ++t)
            if (std::abs(atoms[t].mark) > grid.delta_split) {
                large.push_back(t);
                cd.jump_weight.push_back(atoms[t].weight);
                cd.lambda_direct += atoms[t].weight;
            }
        cd.jump_to.resize(large.size());
        for (auto& v : cd.jump_to) v.resize(size_t(N));

        for (int j = 0; j < N; ++j) {
            double b = 0.0, sig = 0.0, beta = 0.0;
            if (model.drift) model.drift(&x[size_t(j)], &a, &b);
            if (model.diffusion) model.diffusion(&x[size_t(j)], &a, &sig);
            double sig2 = sig * sig;
            for (size_t t = 0; t < atoms.size(); ++t) {
                model.jump_size(&x[size_t(j)], &a, atoms[t].mark, &beta);
                if (std::abs(atoms[t].mark) > grid.delta_split) {
                    b -= atoms[t].weight * beta;  // compensator of the direct term
                } else {
                    sig2 += atoms[t].weight * beta * beta;  // I^{1,delta} Taylor surrogate
                }
            }
            cd.b_eff[size_t(j)] = b;
            cd.sig2_eff[size_t(j)] = sig2;
            cd.fcost[size_t(j)] =
                model.running_cost ? model.running_cost(&x[size_t(j)], &a) : 0.0;
            for (size_t li = 0; li < large.size(); ++li) {
                model.jump_size(&x[size_t(j)], &a, atoms[large[li]].mark, &beta);
                cd.jump_to[li][size_t(j)] =
                    destination_stencil(x[size_t(j)] + beta, grid.x_min, dx, N, margin_width);
            }
            cfl_bound = std::max(cfl_bound, sig2 / (dx * dx) + std::abs(b) / dx + cd.lambda_direct);
        }
    }

    int steps = grid.time_steps;
    if (steps <= 0) steps = std::max(1, int(std::ceil(T * cfl_bound / 0.95)));
    const double dt = T / steps;
    if (dt * cfl_bound > 1.0 + 1e-12) throw std::runtime_error("CFL");

    FdSolution sol;
    sol.grid = grid;
    sol.horizon = T;
    sol.time_steps = steps;
    sol.x = x;
    sol.terminal.resize(size_t(N));
    for (int j = 0; j < N; ++j) sol.terminal[size_t(j)] = model.terminal_cost(&x[size_t(j)]);

    std::vector<double> u = sol.terminal, unew(size_t(N), 0.0);
    for (int m = 0; m < steps; ++m) {
        for (int j = 0; j < N; ++j) {
            double best = -1e300;
            for (int i = 0; i < na; ++i) {
                const ControlData& cd = per_a[size_t(i)];
                const double b = cd.b_eff[size_t(j)];
                // Upwind one-sided differences; at the boundary the missing
                // side contributes zero (keeps the update monotone).
                double adv = 0.0;
                if (b > 0.0 && j + 1 < N) adv = b * (u[size_t(j + 1)] - u[size_t(j)]) / dx;
                if (b < 0.0 && j > 0) adv = b * (u[size_t(j)] - u[size_t(j - 1)]) / dx;
                double dif = 0.0;
                if (j > 0 && j + 1 < N)
                    dif = 0.5 * cd.sig2_eff[size_t(j)] *
                          (u[size_t(j + 1)] - 2.0 * u[size_t(j)] + u[size_t(j - 1)]) / (dx * dx);
                double jmp = 0.0;
                for (size_t li = 0; li < cd.jump_to.size(); ++li) {
                    const Stencil& st = cd.jump_to[li][size_t(j)];
                    const double udest =
                        st.lo_w * u[size_t(st.idx)] + st.hi_w * u[size_t(st.idx + 1)];
                    jmp += cd.jump_weight[li] * (udest - u[size_t(j)]);
                }
                best = std::max(best, adv + dif + jmp + cd.fcost[size_t(j)]);
            }
            unew[size_t(j)] = u[size_t(j)] + dt * best;
        }
        u.swap(unew);
    }
    sol.values = std::move(u);
    return sol;
}

double bs_closed_form(double spot, double strike, double maturity, double vol) {
    const double stdev = vol * std::sqrt(maturity);
    if (stdev < 1e-12) return std::max(spot - strike, 0.0);
    const double d1 = (std::log(spot / strike) + 0.5 * stdev * stdev) / stdev;
    const double d2 = d1 - stdev;
    const auto ncdf = [](double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); };
    return spot * ncdf(d1) - strike * ncdf(d2);
}

double poisson_series_value(double x, double jump_size, double rate, double horizon,
                            const std::function<double(double)>& g, int truncation_terms) {
    const double lam = rate * horizon;
    double pmf = std::exp(-lam);
    double mass = 0.0, value = 0.0;
    for (int k = 0; k < truncation_terms; ++k) {
        value += g(x + jump_size * (double(k) - lam)) * pmf;
        mass += pmf;
        pmf *= lam / double(k + 1);
    }
    if (1.0 - mass >= 1e-12) throw std::runtime_error("increase truncation");
    return value;
}

}  // namespace rcbsde
