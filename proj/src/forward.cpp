#include "rcbsde/forward.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rcbsde/parallel.hpp"
#include "rcbsde/rng.hpp"

namespace rcbsde {

std::vector<std::vector<double>> simulate_brownians(const TimeGrid& grid, int n_paths, int dims,
                                                    uint64_t master_seed, rng::Purpose purpose,
                                                    int workers) {
    const double sqdt = std::sqrt(grid.dt());
    auto out = std::vector<std::vector<double>>(size_t(grid.steps));
    for (auto& slice : out) slice.resize(size_t(n_paths) * size_t(dims));
    for (int k = 0; k < grid.steps; ++k) {
        auto* slice = out[size_t(k)].data();
        parallel_for(n_paths, workers, [&, k, slice](int64_t lo, int64_t hi) {
            for (int64_t p = lo; p < hi; ++p)
                for (int j = 0; j < dims; ++j)
                    slice[p * dims + j] =
                        sqdt * rng::normal_component(master_seed, purpose, uint64_t(p),
                                                     uint32_t(k), j);
        });
    }
    return out;
}

std::vector<std::vector<double>> accumulate_anchor(const std::vector<double>& anchor,
                                                   const std::vector<std::vector<double>>& dB,
                                                   int n_paths, int dim_a, int workers) {
    const int steps = int(dB.size());
    std::vector<std::vector<double>> w(size_t(steps) + 1);
    for (auto& slice : w) slice.resize(size_t(n_paths) * size_t(dim_a));
    parallel_for(n_paths, workers, [&](int64_t lo, int64_t hi) {
        for (int64_t p = lo; p < hi; ++p) {
            for (int j = 0; j < dim_a; ++j) w[0][size_t(p * dim_a + j)] = anchor[size_t(j)];
            for (int k = 0; k < steps; ++k)
                for (int j = 0; j < dim_a; ++j)
                    w[size_t(k + 1)][size_t(p * dim_a + j)] =
                        w[size_t(k)][size_t(p * dim_a + j)] + dB[size_t(k)][size_t(p * dim_a + j)];
        }
    });
    return w;
}

std::vector<double> simulate_I(const std::vector<double>& anchor,
                               const std::vector<std::vector<double>>& dB, int path,
                               const ControlSet& set) {
    const int steps = int(dB.size());
    const int q = set.dim();
    std::vector<double> I(size_t(steps + 1) * size_t(q));
    std::vector<double> wk = anchor;
    surjection_h(wk.data(), set, I.data());
    for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < q; ++j) wk[size_t(j)] += dB[size_t(k)][size_t(path) * size_t(q) + size_t(j)];
        surjection_h(wk.data(), set, I.data() + size_t(k + 1) * size_t(q));
    }
    return I;
}

std::vector<std::vector<JumpEvent>> simulate_cox_thinning(
    const ControlledModel& model, const std::vector<std::vector<double>>& w, int n_paths,
    const TimeGrid& grid, uint64_t master_seed, int workers) {
    auto jumps = std::vector<std::vector<JumpEvent>>(size_t(n_paths));
    if (!model.has_jumps() || model.intensity.rate_bound <= 0.0) return jumps;
    const double bound = model.intensity.rate_bound;
    const int q = model.dim_a;
    const double dt = grid.dt();
    std::atomic<int64_t> bad_path{-1};

    parallel_for(n_paths, workers, [&](int64_t lo, int64_t hi) {
        std::vector<double> I(size_t(q), 0.0);
        for (int64_t p = lo; p < hi; ++p) {
            double t = grid.t0;
            for (uint32_t slot = 0;; ++slot) {
                t += rng::exponential(master_seed, rng::Purpose::cox_gap, uint64_t(p), 0, slot) /
                     bound;
                if (t > grid.t1) break;
                int k = int((t - grid.t0) / dt);
                k = std::min(k, grid.steps - 1);
                surjection_h(&w[size_t(k)][size_t(p) * size_t(q)], model.control_set, I.data());
                const double rate = model.intensity.total_rate(I.data());
                if (rate > bound + 1e-12) {
                    int64_t expected = -1;
                    bad_path.compare_exchange_strong(expected, p);
                    return;
                }
                const auto [u_accept, u_mark] = rng::uniform_pair(
                    master_seed, rng::Purpose::cox_accept, uint64_t(p), 0, slot);
                if (u_accept * bound <= rate) {
                    jumps[size_t(p)].push_back(
                        {k, t, model.intensity.mark_sampler(I.data(), u_mark)});
                }
            }
        }
    });
    if (bad_path.load() >= 0)
        throw std::runtime_error("majorant violated (path " + std::to_string(bad_path.load()) +
                                 ")");
    return jumps;
}

std::vector<std::vector<double>> simulate_X_euler(const ControlledModel& model,
                                                  const std::vector<double>& x0,
                                                  const PathEnsemble& ensemble,
                                                  int compensator_samples, int workers) {
    const int d = model.dim_x, q = model.dim_a;
    const int steps = ensemble.grid.steps;
    const int n_paths = ensemble.n_paths;
    const double dt = ensemble.grid.dt();
    const bool atomic = model.intensity.is_atomic();

    std::vector<std::vector<double>> X(size_t(steps) + 1);
    for (auto& slice : X) slice.resize(size_t(n_paths) * size_t(d));
    std::atomic<int> bad_step{-1};

    parallel_for(n_paths, workers, [&](int64_t lo, int64_t hi) {
        std::vector<double> I(size_t(q), 0.0), b(size_t(d), 0.0), sig(size_t(d) * size_t(d));
        std::vector<double> beta(size_t(d), 0.0), xk(size_t(d), 0.0);
        for (int64_t p = lo; p < hi; ++p) {
            for (int j = 0; j < d; ++j) X[0][size_t(p) * size_t(d) + size_t(j)] = x0[size_t(j)];
            size_t next_event = 0;
            const auto& events = ensemble.jumps[size_t(p)];
            for (int k = 0; k < steps; ++k) {
                const double* xprev = &X[size_t(k)][size_t(p) * size_t(d)];
                std::copy(xprev, xprev + d, xk.begin());
                surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)], model.control_set,
                             I.data());
                model.drift(xk.data(), I.data(), b.data());
                model.diffusion(xk.data(), I.data(), sig.data());
                double* xnext = &X[size_t(k + 1)][size_t(p) * size_t(d)];
                const double* dw = &ensemble.dW[size_t(k)][size_t(p) * size_t(d)];
                for (int i = 0; i < d; ++i) {
                    double v = xk[size_t(i)] + b[size_t(i)] * dt;
                    for (int j = 0; j < d; ++j) v += sig[size_t(i) * size_t(d) + size_t(j)] * dw[j];
                    xnext[i] = v;
                }
                if (model.has_jumps()) {
                    // Accepted events in this step, applied at the opening state.
                    while (next_event < events.size() && events[next_event].step == k) {
                        model.jump_size(xk.data(), I.data(), events[next_event].mark, beta.data());
                        for (int i = 0; i < d; ++i) xnext[i] += beta[size_t(i)];
                        ++next_event;
                    }
                    // Compensator drift: exact for atomic kernels, MC otherwise.
                    if (atomic) {
                        for (const auto& atom : model.intensity.atoms(I.data())) {
                            model.jump_size(xk.data(), I.data(), atom.mark, beta.data());
                            for (int i = 0; i < d; ++i) xnext[i] -= atom.weight * beta[size_t(i)] * dt;
                        }
                    } else {
                        const double rate = model.intensity.total_rate(I.data());
                        if (rate > 0.0) {
                            for (int s = 0; s < compensator_samples; ++s) {
                                const double u = rng::uniform(ensemble.master_seed,
                                                              rng::Purpose::compensator_mc,
                                                              uint64_t(p), uint32_t(k), uint32_t(s));
                                model.jump_size(xk.data(), I.data(),
                                                model.intensity.mark_sampler(I.data(), u),
                                                beta.data());
                                for (int i = 0; i < d; ++i)
                                    xnext[i] -= rate * beta[size_t(i)] * dt / compensator_samples;
                            }
                        }
                    }
                }
                for (int i = 0; i < d; ++i) {
                    if (!std::isfinite(xnext[i])) {
                        int expected = -1;
                        bad_step.compare_exchange_strong(expected, k + 1);
                        return;
                    }
                }
            }
        }
    });
    if (bad_step.load() >= 0)
        throw std::runtime_error("explosion at step " + std::to_string(bad_step.load()));
    return X;
}

PathEnsemble simulate_ensemble(const ControlledModel& model, const TimeGrid& grid, int n_paths,
                               const std::vector<double>& x0, const std::vector<double>& anchor,
                               uint64_t master_seed, int workers) {
    PathEnsemble ens;
    ens.grid = grid;
    ens.n_paths = n_paths;
    ens.dim_x = model.dim_x;
    ens.dim_a = model.dim_a;
    ens.master_seed = master_seed;
    ens.anchor = anchor;
    ens.dW = simulate_brownians(grid, n_paths, model.dim_x, master_seed,
                                rng::Purpose::brownian_w, workers);
    ens.dB = simulate_brownians(grid, n_paths, model.dim_a, master_seed,
                                rng::Purpose::brownian_b, workers);
    ens.w = accumulate_anchor(anchor, ens.dB, n_paths, model.dim_a, workers);
    ens.jumps = simulate_cox_thinning(model, ens.w, n_paths, grid, master_seed, workers);
    ens.X = simulate_X_euler(model, x0, ens, 16, workers);
    return ens;
}

}  // namespace rcbsde
