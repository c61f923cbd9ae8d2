#include "rcbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rcbsde/parallel.hpp"
#include "rcbsde/rng.hpp"

namespace rcbsde {

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stdev_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size()));
}

// Smoothed magnitude sqrt(V^2 + mu^2) - mu: below |V|, exact at V = 0, and
// flat at the noise floor instead of kinked.
double smoothed_mag(double v2, double mu) {
    return std::sqrt(v2 + mu * mu) - mu;
}

struct StepFeatures {
    FeatureTable table;
    bool with_payoff = false;
};

StepFeatures step_features(const ControlledModel& model, const PathEnsemble& ens, int k,
                           const BasisSpec& basis) {
    const int P = ens.n_paths, d = ens.dim_x, q = ens.dim_a;
    StepFeatures out;
    out.with_payoff = basis.kind == BasisKind::cellpoly;
    if (out.with_payoff && (d != 1 || q != 1))
        throw std::invalid_argument("cellpoly basis requires dim_x = dim_a = 1");
    out.table.n_rows = P;
    if (out.with_payoff) {
        std::vector<double> x(ens.X[size_t(k)]), pay(size_t(P), 0.0);
        for (int p = 0; p < P; ++p) pay[size_t(p)] = model.terminal_cost(&x[size_t(p)]);
        out.table.columns = {std::move(x), std::move(pay), ens.w[size_t(k)]};
    } else {
        for (int j = 0; j < d; ++j) {
            std::vector<double> col(size_t(P), 0.0);
            for (int p = 0; p < P; ++p) col[size_t(p)] = ens.X[size_t(k)][size_t(p * d + j)];
            out.table.columns.push_back(std::move(col));
        }
        for (int j = 0; j < q; ++j) {
            std::vector<double> col(size_t(P), 0.0);
            for (int p = 0; p < P; ++p) col[size_t(p)] = ens.w[size_t(k)][size_t(p * q + j)];
            out.table.columns.push_back(std::move(col));
        }
    }
    return out;
}

// Features for predict() at jump-shifted states x + beta, same w slice.
FeatureTable shifted_features(const ControlledModel& model, const StepFeatures& base,
                              const std::vector<double>& x_shifted) {
    FeatureTable t;
    t.n_rows = int(x_shifted.size());
    std::vector<double> pay(x_shifted.size());
    for (size_t p = 0; p < x_shifted.size(); ++p) pay[p] = model.terminal_cost(&x_shifted[p]);
    t.columns = {x_shifted, std::move(pay), base.table.columns[2]};
    return t;
}

}  // namespace

BsdeSolution backward_solve(const ControlledModel& model, const PathEnsemble& ensemble,
                            const BasisSpec& basis, double penalty_n, const SolverOptions& opts) {
    const TimeGrid& grid = ensemble.grid;
    const int P = ensemble.n_paths, d = ensemble.dim_x, q = ensemble.dim_a;
    const int K = grid.steps;
    const double dt = grid.dt();
    if (penalty_n * dt > 1.0 + 1e-12) throw std::invalid_argument("penalty violates step bound");
    if (penalty_n < 0.0) throw std::invalid_argument("penalty must be nonnegative");

    const bool atomic_jumps = model.has_jumps() && model.intensity.is_atomic();
    const bool use_jump_cv = opts.jump_control_variate && atomic_jumps &&
                             basis.kind == BasisKind::cellpoly;
    const bool has_diffusion = bool(model.diffusion);

    // The cell layout is anchored on the control ball; pin it to the model so
    // callers cannot pass a stale geometry.
    BasisSpec spec = basis;
    if (q == 1) {
        spec.ball_center = model.control_set.center[0];
        spec.ball_radius = model.control_set.radius;
    }

    BsdeSolution sol;
    sol.grid = grid;
    sol.penalty_n = penalty_n;
    sol.Y.assign(size_t(K) + 1, {});
    sol.Z.assign(size_t(K), std::vector<double>(size_t(P) * size_t(d), 0.0));
    sol.V.assign(size_t(K), std::vector<double>(size_t(P) * size_t(q), 0.0));
    sol.K_increments.assign(size_t(K), std::vector<double>(size_t(P), 0.0));

    // Terminal condition, exact pathwise.
    sol.Y[size_t(K)].resize(size_t(P));
    parallel_for(P, opts.workers, [&](int64_t lo, int64_t hi) {
        for (int64_t p = lo; p < hi; ++p)
            sol.Y[size_t(K)][size_t(p)] = model.terminal_cost(&ensemble.X[size_t(K)][size_t(p) * size_t(d)]);
    });

    // Per-step event buckets for the jump control variate.
    auto events_by_step = std::vector<std::vector<std::pair<int, double>>>(size_t(K));
    if (atomic_jumps)
        for (int p = 0; p < P; ++p)
            for (const auto& ev : ensemble.jumps[size_t(p)])
                events_by_step[size_t(ev.step)].push_back({p, ev.mark});

    std::vector<double> I(size_t(q), 0.0), beta(size_t(d), 0.0);
    double F = 0.0;

    for (int k = K - 1; k >= 0; --k) {
        const auto& Ynext = sol.Y[size_t(k + 1)];
        std::vector<double>& Yk = sol.Y[size_t(k)];
        Yk.assign(size_t(P), 0.0);
        std::vector<double> Yf(size_t(P), 0.0), resid(size_t(P), 0.0);
        std::vector<double> cv(size_t(P), 0.0);
        std::vector<double> v2(size_t(P), 0.0);   // |V_k|^2 accumulated over components
        std::vector<double> s2(size_t(P), 0.0);   // noise-scale^2 accumulated

        if (k > 0) {
            const StepFeatures feats = step_features(model, ensemble, k, spec);
            const auto design = build_design(feats.table, spec);

            const auto yfit = design->fit(Ynext);
            std::copy(yfit->fitted().begin(), yfit->fitted().end(), Yf.begin());
            for (int p = 0; p < P; ++p) resid[size_t(p)] = Ynext[size_t(p)] - Yf[size_t(p)];

            // Z components from centered targets; fitted Z feeds the
            // diffusive control variate.
            if (has_diffusion) {
                std::vector<double> ztgt(size_t(P), 0.0);
                for (int j = 0; j < d; ++j) {
                    for (int p = 0; p < P; ++p)
                        ztgt[size_t(p)] =
                            resid[size_t(p)] * ensemble.dW[size_t(k)][size_t(p * d + j)] / dt;
                    const auto zfit = design->fit(ztgt);
                    const auto& zf = zfit->fitted();
                    for (int p = 0; p < P; ++p) {
                        sol.Z[size_t(k)][size_t(p * d + j)] = zf[size_t(p)];
                        if (opts.z_control_variate)
                            cv[size_t(p)] += zf[size_t(p)] * ensemble.dW[size_t(k)][size_t(p * d + j)];
                    }
                }
            }

            // Jump control variate: realized minus compensated psi, where
            // psi is the fitted value function's response to one jump.
            // Applied only when the atom count is uniform across paths, so
            // the compensated pair stays exactly mean-zero.
            if (use_jump_cv) {
                size_t n_atoms = 0;
                bool uniform = true;
                std::vector<double> marks, weights;  // P x n_atoms, row-major
                for (int p = 0; p < P; ++p) {
                    surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)],
                                 model.control_set, I.data());
                    const auto atoms = model.intensity.atoms(I.data());
                    if (p == 0) {
                        n_atoms = atoms.size();
                        marks.resize(size_t(P) * n_atoms);
                        weights.resize(size_t(P) * n_atoms);
                    } else if (atoms.size() != n_atoms) {
                        uniform = false;
                        break;
                    }
                    for (size_t j = 0; j < n_atoms; ++j) {
                        marks[size_t(p) * n_atoms + j] = atoms[j].mark;
                        weights[size_t(p) * n_atoms + j] = atoms[j].weight;
                    }
                }
                if (uniform && n_atoms > 0) {
                    std::vector<double> x_shift(size_t(P), 0.0);
                    for (size_t j = 0; j < n_atoms; ++j) {
                        for (int p = 0; p < P; ++p) {
                            surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)],
                                         model.control_set, I.data());
                            const double* xp = &ensemble.X[size_t(k)][size_t(p) * size_t(d)];
                            model.jump_size(xp, I.data(), marks[size_t(p) * n_atoms + j],
                                            beta.data());
                            x_shift[size_t(p)] = xp[0] + beta[0];
                        }
                        const auto pred = yfit->predict(shifted_features(model, feats, x_shift));
                        for (int p = 0; p < P; ++p)
                            cv[size_t(p)] -= dt * weights[size_t(p) * n_atoms + j] *
                                             (pred[size_t(p)] - Yf[size_t(p)]);
                    }
                }
                // realized side
                const auto& evs = events_by_step[size_t(k)];
                if (uniform && !evs.empty()) {
                    std::vector<double> xe(evs.size());
                    FeatureTable base_rows;
                    base_rows.n_rows = int(evs.size());
                    std::vector<double> we(evs.size());
                    for (size_t i = 0; i < evs.size(); ++i) {
                        const int p = evs[i].first;
                        surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)],
                                     model.control_set, I.data());
                        const double* xp = &ensemble.X[size_t(k)][size_t(p) * size_t(d)];
                        model.jump_size(xp, I.data(), evs[i].second, beta.data());
                        xe[i] = xp[0] + beta[0];
                        we[i] = ensemble.w[size_t(k)][size_t(p) * size_t(q)];
                    }
                    FeatureTable shifted;
                    shifted.n_rows = int(evs.size());
                    std::vector<double> pay(evs.size());
                    for (size_t i = 0; i < evs.size(); ++i) pay[i] = model.terminal_cost(&xe[i]);
                    shifted.columns = {std::move(xe), std::move(pay), std::move(we)};
                    const auto pred = yfit->predict(shifted);
                    for (size_t i = 0; i < evs.size(); ++i)
                        cv[size_t(evs[i].first)] += pred[i] - Yf[size_t(evs[i].first)];
                }
            }

            // V components from centered, variance-reduced targets.
            std::vector<double> vtgt(size_t(P), 0.0);
            for (int j = 0; j < q; ++j) {
                for (int p = 0; p < P; ++p)
                    vtgt[size_t(p)] = (resid[size_t(p)] - cv[size_t(p)]) *
                                      ensemble.dB[size_t(k)][size_t(p * q + j)] / dt;
                const auto vfit = design->fit(vtgt);
                const auto& vf = vfit->fitted();
                std::vector<double> vres(size_t(P), 0.0);
                for (int p = 0; p < P; ++p) vres[size_t(p)] = vtgt[size_t(p)] - vf[size_t(p)];
                const auto scale = vfit->noise_scale(vres);
                for (int p = 0; p < P; ++p) {
                    sol.V[size_t(k)][size_t(p * q + j)] = vf[size_t(p)];
                    v2[size_t(p)] += vf[size_t(p)] * vf[size_t(p)];
                    s2[size_t(p)] += scale[size_t(p)] * scale[size_t(p)];
                }
            }
        } else {
            // All paths share the start point: projections reduce to means.
            const double ymean = mean_of(Ynext);
            std::fill(Yf.begin(), Yf.end(), ymean);
            for (int p = 0; p < P; ++p) resid[size_t(p)] = Ynext[size_t(p)] - ymean;
            sol.value_stderr = stdev_of(resid) / std::sqrt(double(P));

            if (has_diffusion) {
                for (int j = 0; j < d; ++j) {
                    double zm = 0.0;
                    for (int p = 0; p < P; ++p)
                        zm += resid[size_t(p)] * ensemble.dW[0][size_t(p * d + j)];
                    zm /= double(P) * dt;
                    for (int p = 0; p < P; ++p) {
                        sol.Z[0][size_t(p * d + j)] = zm;
                        if (opts.z_control_variate)
                            cv[size_t(p)] += zm * ensemble.dW[0][size_t(p * d + j)];
                    }
                }
            }
            if (use_jump_cv) {
                // No fitted surrogate yet at the first step; use the terminal
                // cost as the jump-response shape.
                surjection_h(&ensemble.w[0][0], model.control_set, I.data());
                const double* x0 = &ensemble.X[0][0];
                const double g0 = model.terminal_cost(x0);
                for (const auto& atom : model.intensity.atoms(I.data())) {
                    model.jump_size(x0, I.data(), atom.mark, beta.data());
                    const double x1 = x0[0] + beta[0];
                    const double psi = model.terminal_cost(&x1) - g0;
                    for (int p = 0; p < P; ++p) cv[size_t(p)] -= dt * atom.weight * psi;
                }
                for (const auto& ev : events_by_step[0]) {
                    model.jump_size(x0, I.data(), ev.second, beta.data());
                    const double x1 = x0[0] + beta[0];
                    cv[size_t(ev.first)] += model.terminal_cost(&x1) - g0;
                }
            }
            std::vector<double> vtgt(size_t(P), 0.0);
            for (int j = 0; j < q; ++j) {
                for (int p = 0; p < P; ++p)
                    vtgt[size_t(p)] = (resid[size_t(p)] - cv[size_t(p)]) *
                                      ensemble.dB[0][size_t(p * q + j)] / dt;
                const double vm = mean_of(vtgt);
                const double vs = stdev_of(vtgt) / std::sqrt(double(P));
                for (int p = 0; p < P; ++p) {
                    sol.V[0][size_t(p * q + j)] = vm;
                    v2[size_t(p)] += vm * vm;
                    s2[size_t(p)] += vs * vs;
                }
            }
        }

        // Debias, smooth, penalize.
        double mag_mean = 0.0;
        for (int p = 0; p < P; ++p) {
            double vv = v2[size_t(p)];
            const double ss = s2[size_t(p)];
            if (opts.debias) vv = std::max(vv - ss, 0.0);
            const double mu = opts.smoothing > 0.0 ? opts.smoothing * std::sqrt(ss) : 0.0;
            const double mag = smoothed_mag(vv, mu);
            double fk = 0.0;
            if (model.running_cost) {
                surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)], model.control_set,
                             I.data());
                fk = model.running_cost(&ensemble.X[size_t(k)][size_t(p) * size_t(d)], I.data());
            }
            sol.K_increments[size_t(k)][size_t(p)] = penalty_n * mag * dt;
            Yk[size_t(p)] = Yf[size_t(p)] + fk * dt + penalty_n * mag * dt;
            mag_mean += mag;
        }
        F += mag_mean / double(P) * dt;
    }

    sol.value = sol.Y[0][0];
    sol.constraint = F;
    return sol;
}

double constraint_violation(const BsdeSolution& sol) { return sol.constraint; }

std::vector<std::vector<double>> interior_anchors(const ControlSet& set, int count,
                                                  uint64_t master_seed) {
    const int q = set.dim();
    std::vector<std::vector<double>> anchors;
    anchors.push_back(set.center);
    for (int i = 1; i < count; ++i) {
        // Uniform direction, radius <= r/2 (interior-only probing).
        std::vector<double> dir(size_t(q), 0.0);
        double norm2 = 0.0;
        for (int j = 0; j < q; ++j) {
            dir[size_t(j)] = rng::normal_component(master_seed, rng::Purpose::anchor, uint64_t(i),
                                                   0, j);
            norm2 += dir[size_t(j)] * dir[size_t(j)];
        }
        const double u =
            rng::uniform(master_seed, rng::Purpose::anchor, uint64_t(i), 1, 0);
        const double rad = 0.5 * set.radius * std::pow(u, 1.0 / q);
        std::vector<double> a = set.center;
        if (norm2 > 0.0)
            for (int j = 0; j < q; ++j) a[size_t(j)] += rad * dir[size_t(j)] / std::sqrt(norm2);
        anchors.push_back(std::move(a));
    }
    return anchors;
}

namespace {

struct AnchorRuns {
    std::vector<PathEnsemble> ensembles;
    std::vector<std::vector<double>> anchors;
};

AnchorRuns build_anchor_ensembles(const ControlledModel& model, const TimeGrid& grid, int n_paths,
                                  const std::vector<double>& x, int interior_probe_count,
                                  uint64_t master_seed, int workers) {
    AnchorRuns runs;
    runs.anchors = interior_anchors(model.control_set, std::max(1, interior_probe_count),
                                    master_seed);
    // Same master seed for every anchor: common random numbers make the
    // anchor spread measure the a-dependence, not Monte Carlo noise.
    for (const auto& a : runs.anchors)
        runs.ensembles.push_back(simulate_ensemble(model, grid, n_paths, x, a, master_seed,
                                                   workers));
    return runs;
}

}  // namespace

PenaltySweepReport penalty_sweep(const ControlledModel& model, double t,
                                 const std::vector<double>& x, const TimeGrid& grid, int n_paths,
                                 const BasisSpec& basis, const std::vector<double>& penalties,
                                 int interior_probe_count, uint64_t master_seed,
                                 const SolverOptions& opts) {
    for (size_t i = 1; i < penalties.size(); ++i)
        if (penalties[i] <= penalties[i - 1])
            throw std::invalid_argument("penalties must be strictly increasing");
    TimeGrid g = grid;
    g.t0 = t;
    const auto runs =
        build_anchor_ensembles(model, g, n_paths, x, interior_probe_count, master_seed,
                               opts.workers);

    PenaltySweepReport rep;
    rep.penalties = penalties;
    for (double n : penalties) {
        double vsum = 0.0, sesum = 0.0, fsum = 0.0;
        double vmin = 0.0, vmax = 0.0;
        for (size_t ai = 0; ai < runs.ensembles.size(); ++ai) {
            const auto sol = backward_solve(model, runs.ensembles[ai], basis, n, opts);
            vsum += sol.value;
            sesum += sol.value_stderr;
            fsum += sol.constraint;
            vmin = ai == 0 ? sol.value : std::min(vmin, sol.value);
            vmax = ai == 0 ? sol.value : std::max(vmax, sol.value);
        }
        const double count = double(runs.ensembles.size());
        rep.values.push_back(vsum / count);
        rep.stderrs.push_back(sesum / count);
        rep.constraint_norms.push_back(fsum / count);
        rep.a_spreads.push_back(vmax - vmin);
    }
    for (size_t i = 0; i + 1 < rep.values.size(); ++i) {
        const double combined =
            std::sqrt(rep.stderrs[i] * rep.stderrs[i] + rep.stderrs[i + 1] * rep.stderrs[i + 1]);
        rep.monotone_flags.push_back(rep.values[i + 1] >= rep.values[i] - 2.0 * combined);
    }
    return rep;
}

ValueEstimate value_at(const ControlledModel& model, double t, const std::vector<double>& x,
                       const TimeGrid& grid, int n_paths, const BasisSpec& basis,
                       double penalty_max, int interior_probe_count, uint64_t master_seed,
                       const SolverOptions& opts) {
    TimeGrid g = grid;
    g.t0 = t;
    const auto runs =
        build_anchor_ensembles(model, g, n_paths, x, interior_probe_count, master_seed,
                               opts.workers);
    double vsum = 0.0, sesum = 0.0, vmin = 0.0, vmax = 0.0;
    for (size_t ai = 0; ai < runs.ensembles.size(); ++ai) {
        const auto sol = backward_solve(model, runs.ensembles[ai], basis, penalty_max, opts);
        vsum += sol.value;
        sesum += sol.value_stderr;
        vmin = ai == 0 ? sol.value : std::min(vmin, sol.value);
        vmax = ai == 0 ? sol.value : std::max(vmax, sol.value);
    }
    const double count = double(runs.ensembles.size());
    return {vsum / count, sesum / count, vmax - vmin};
}

}  // namespace rcbsde
