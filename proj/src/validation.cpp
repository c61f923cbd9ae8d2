#include "rcbsde/validation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcbsde {

namespace {

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& v) {
    const double n = double(v.size());
    if (v.empty()) return {};
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= std::max(n - 1.0, 1.0);
    return {m, std::sqrt(var / n)};
}

double safe_z(double stat, double se) {
    if (se > 0.0) return stat / se;
    return stat == 0.0 ? 0.0 : stat / 1e-300;
}

// Regularized upper incomplete gamma Q(a, x) by series / continued fraction.
double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    const double eps = 1e-14, fpmin = 1e-300;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * eps) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - lg);
    }
    double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace

StatTestReport make_stat_report(double statistic, double std_error, long n_samples,
                                double threshold) {
    StatTestReport r;
    r.statistic = statistic;
    r.std_error = std_error;
    r.z_score = safe_z(statistic, std_error);
    r.threshold = threshold;
    r.pass = std::abs(r.z_score) <= threshold;
    r.n_samples = n_samples;
    return r;
}

StatTestReport laplace_functional_test(const PathEnsemble& ensemble, const ControlledModel& model,
                                       const MarkTimeFn& ell, double threshold) {
    if (!model.has_jumps() || !model.intensity.is_atomic())
        throw std::invalid_argument("Laplace functional test needs an atomic kernel");
    const int P = ensemble.n_paths, K = ensemble.grid.steps, q = ensemble.dim_a;
    const double dt = ensemble.grid.dt();
    std::vector<double> M(size_t(P), 0.0);
    std::vector<double> I(size_t(q), 0.0);
    for (int p = 0; p < P; ++p) {
        double jump_sum = 0.0;
        for (const auto& ev : ensemble.jumps[size_t(p)])
            jump_sum += ell(ensemble.grid.time_at(ev.step), ev.mark);
        double comp = 0.0;
        for (int k = 0; k < K; ++k) {
            surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)], model.control_set,
                         I.data());
            const double tk = ensemble.grid.time_at(k);
            for (const auto& atom : model.intensity.atoms(I.data()))
                comp += dt * atom.weight * (1.0 - std::exp(-ell(tk, atom.mark)));
        }
        M[size_t(p)] = std::exp(comp - jump_sum);
    }
    const MeanSe ms = mean_and_se(M);
    return make_stat_report(ms.mean - 1.0, ms.se, P, threshold);
}

StatTestReport martingale_residual_test(const BsdeSolution& sol, const PathEnsemble& ensemble,
                                        const ControlledModel& model, double threshold) {
    const int P = ensemble.n_paths, K = ensemble.grid.steps;
    const int d = ensemble.dim_x, q = ensemble.dim_a;
    const double dt = ensemble.grid.dt();
    if (int(sol.Y.size()) != K + 1 || int(sol.Y[0].size()) != P)
        throw std::invalid_argument("solution and ensemble are not aligned");

    std::vector<double> I(size_t(q), 0.0);
    // Residual decomposition rho = base - zpart - vpart with
    // base = Y_{k+1} - fitted.  The fitted Z and V were regressed on these
    // very increments, so the cancellation inside rho is partly an in-sample
    // artifact; dividing mean(rho) by the post-cancellation spread inflates
    // the z-score with the feature count.  Each mean is instead tested
    // against the no-cancellation scale
    // sqrt(var(base) + var(zpart) + var(vpart)) / sqrt(P).
    std::vector<double> base(size_t(P), 0.0), zpart(size_t(P), 0.0), vpart(size_t(P), 0.0);
    // Path functionals sum_k rho_k * phi(X_k) for phi in {1, x, g(x)}.
    // Test functions must lie in the regression span for the in-sample
    // residual mean to be centered; these three are spanned by every basis
    // the solver uses, while w is deliberately not resolved within cells.
    std::array<std::array<std::vector<double>, 3>, 3> func;
    for (auto& phi : func)
        for (auto& part : phi) part.assign(size_t(P), 0.0);

    const auto component_stat = [](const std::vector<double>& b, const std::vector<double>& z,
                                   const std::vector<double>& v) {
        const MeanSe mb = mean_and_se(b), mz = mean_and_se(z), mv = mean_and_se(v);
        return MeanSe{mb.mean - mz.mean - mv.mean,
                      std::sqrt(mb.se * mb.se + mz.se * mz.se + mv.se * mv.se)};
    };

    // Exactly spanned problems leave only rounding dust in the residuals;
    // means below this floor count as zero instead of producing dust/dust
    // z-scores.
    double yscale = 0.0;
    for (double y : sol.Y.back()) yscale += std::abs(y);
    const double floor = 1e-9 * std::max(1.0, yscale / double(P));

    double worst_stat = 0.0, worst_se = 0.0, worst_z = 0.0;
    const auto consider = [&](const MeanSe& ms) {
        if (std::abs(ms.mean) <= floor) return;
        const double z = safe_z(ms.mean, ms.se);
        if (std::abs(z) >= std::abs(worst_z)) {
            worst_z = z;
            worst_stat = ms.mean;
            worst_se = ms.se;
        }
    };

    for (int k = 0; k < K; ++k) {
        for (int p = 0; p < P; ++p) {
            double fk = 0.0;
            if (model.running_cost) {
                surjection_h(&ensemble.w[size_t(k)][size_t(p) * size_t(q)], model.control_set,
                             I.data());
                fk = model.running_cost(&ensemble.X[size_t(k)][size_t(p) * size_t(d)], I.data());
            }
            const double fitted =
                sol.Y[size_t(k)][size_t(p)] - fk * dt - sol.K_increments[size_t(k)][size_t(p)];
            const double b = sol.Y[size_t(k) + 1][size_t(p)] - fitted;
            double zc = 0.0, vc = 0.0;
            for (int i = 0; i < d; ++i)
                zc += sol.Z[size_t(k)][size_t(p) * size_t(d) + size_t(i)] *
                      ensemble.dW[size_t(k)][size_t(p) * size_t(d) + size_t(i)];
            for (int j = 0; j < q; ++j)
                vc += sol.V[size_t(k)][size_t(p) * size_t(q) + size_t(j)] *
                      ensemble.dB[size_t(k)][size_t(p) * size_t(q) + size_t(j)];
            base[size_t(p)] = b;
            zpart[size_t(p)] = zc;
            vpart[size_t(p)] = vc;
            const double* xk = &ensemble.X[size_t(k)][size_t(p) * size_t(d)];
            const double phi[3] = {1.0, xk[0],
                                   model.terminal_cost ? model.terminal_cost(xk) : 0.0};
            for (int i = 0; i < 3; ++i) {
                func[size_t(i)][0][size_t(p)] += b * phi[i];
                func[size_t(i)][1][size_t(p)] += zc * phi[i];
                func[size_t(i)][2][size_t(p)] += vc * phi[i];
            }
        }
        consider(component_stat(base, zpart, vpart));
    }
    for (const auto& phi : func) consider(component_stat(phi[0], phi[1], phi[2]));
    return make_stat_report(worst_stat, worst_se, P, threshold);
}

SweepDiagnostics sweep_diagnostics(const PenaltySweepReport& report, double spread_fraction,
                                   double slope_cap) {
    SweepDiagnostics out;
    const size_t m = report.penalties.size();
    if (m == 0) return out;

    out.monotone = true;
    for (bool flag : report.monotone_flags) out.monotone = out.monotone && flag;

    // Log-log slope of the constraint norm over the entries above a
    // float-dust floor: exactly representable problems leave F at rounding
    // noise, which must grade as a resolved constraint, not a flat slope.
    const double dust = 1e-12 * std::max(1.0, std::abs(report.values[m - 1]));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int npos = 0;
    double fmax = 0.0;
    for (size_t i = 0; i < m; ++i) {
        fmax = std::max(fmax, report.constraint_norms[i]);
        if (report.constraint_norms[i] > dust && report.penalties[i] > 0.0) {
            const double lx = std::log(report.penalties[i]);
            const double ly = std::log(report.constraint_norms[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++npos;
        }
    }
    if (npos >= 2) {
        out.constraint_slope = (npos * sxy - sx * sy) / (npos * sxx - sx * sx);
        out.constraint_decaying = out.constraint_slope <= slope_cap;
    } else {
        out.constraint_slope = 0.0;
        out.constraint_decaying = fmax <= dust;  // constraint already resolved
    }

    const double value = std::abs(report.values[m - 1]);
    const double spread = report.a_spreads[m - 1];
    out.final_spread_fraction = spread / std::max(value, 1e-300);
    out.a_independent = spread <= spread_fraction * std::max(value, 1e-300);
    return out;
}

double chi_square_pvalue(double statistic, int dof) {
    if (statistic <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

double normal_quantile(double p) {
    // Acklam's rational approximation (relative error below 1.2e-9).
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    const double plow = 0.02425;
    if (p < plow) {
        const double u = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (p > 1.0 - plow) {
        const double u = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    const double u = p - 0.5, t = u * u;
    return (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
           (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
}

StatTestReport chi_square_gof_poisson(const std::vector<int>& counts, double lambda,
                                      double significance) {
    if (counts.empty()) throw std::invalid_argument("no counts");
    const double n = double(counts.size());

    // Bin boundaries on k = 0,1,2,...: close a bin once its expected count
    // reaches 5; the final bin absorbs the whole tail (merged backward if thin).
    std::vector<int> upper;  // bin i covers (upper[i-1], upper[i]]
    std::vector<double> expected;
    double pmf = std::exp(-lambda), acc = 0.0, cum = 0.0;
    int kmax = *std::max_element(counts.begin(), counts.end());
    for (int k = 0; k <= kmax + 1; ++k) {
        acc += n * pmf;
        cum += pmf;
        if (acc >= 5.0) {
            upper.push_back(k);
            expected.push_back(acc);
            acc = 0.0;
        }
        pmf *= lambda / double(k + 1);
    }
    const double tail = n * (1.0 - cum) + acc;
    if (!expected.empty() && tail < 5.0) {
        expected.back() += tail;
        upper.back() = std::numeric_limits<int>::max();
    } else {
        expected.push_back(tail);
        upper.push_back(std::numeric_limits<int>::max());
    }
    if (expected.size() < 2) throw std::invalid_argument("too few counts for a chi-square test");

    std::vector<double> observed(expected.size(), 0.0);
    for (int cnt : counts) {
        size_t bin = 0;
        while (cnt > upper[bin]) ++bin;
        observed[bin] += 1.0;
    }
    double chi2 = 0.0;
    for (size_t i = 0; i < expected.size(); ++i)
        chi2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    const int dof = int(expected.size()) - 1;
    const double p = chi_square_pvalue(chi2, dof);

    StatTestReport r;
    r.statistic = chi2;
    r.std_error = std::sqrt(2.0 * dof);
    r.z_score = normal_quantile(1.0 - std::clamp(p, 1e-15, 1.0 - 1e-15));
    r.threshold = std::abs(normal_quantile(1.0 - significance));
    r.pass = std::abs(r.z_score) <= r.threshold;
    r.n_samples = long(counts.size());
    return r;
}

}  // namespace rcbsde
