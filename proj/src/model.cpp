#include "rcbsde/model.hpp"

#include <algorithm>
#include <cmath>

#include "rcbsde/rng.hpp"

namespace rcbsde {

double radial_profile(double rho) {
    if (rho >= 1.0) return 1.0;
    if (rho <= 0.0) return 0.0;
    return ((6.0 * rho - 15.0) * rho + 10.0) * rho * rho * rho;
}

void surjection_h(const double* a, const ControlSet& set, double* out) {
    const int q = set.dim();
    double norm2 = 0.0;
    for (int j = 0; j < q; ++j) {
        const double u = a[j] - set.center[j];
        norm2 += u * u;
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
        std::copy(set.center.begin(), set.center.end(), out);
        return;
    }
    const double scale = set.radius * radial_profile(norm / set.radius) / norm;
    for (int j = 0; j < q; ++j) out[j] = set.center[j] + scale * (a[j] - set.center[j]);
}

std::vector<double> surjection_h(const std::vector<double>& a, const ControlSet& set) {
    std::vector<double> out(a.size());
    surjection_h(a.data(), set, out.data());
    return out;
}

double surjection_h1(double a, const ControlSet& set) {
    double out;
    surjection_h(&a, set, &out);
    return out;
}

std::vector<double> surjection_preimage(const std::vector<double>& y, const ControlSet& set) {
    const int q = set.dim();
    double norm2 = 0.0;
    for (int j = 0; j < q; ++j) {
        const double u = y[j] - set.center[j];
        norm2 += u * u;
    }
    const double norm = std::sqrt(norm2);
    if (norm >= set.radius) throw std::invalid_argument("not in open ball");
    if (norm == 0.0) return set.center;

    // Invert the radial profile: find rho with s(rho) = norm/radius.
    const double target = norm / set.radius;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (radial_profile(mid) < target ? lo : hi) = mid;
    }
    const double rho = 0.5 * (lo + hi);
    std::vector<double> a(size_t(q), 0.0);
    const double scale = set.radius * rho / norm;
    for (int j = 0; j < q; ++j) a[j] = set.center[j] + scale * (y[j] - set.center[j]);
    return a;
}

ControlledModel make_benchmark(const std::string& name) {
    ControlledModel m;
    m.name = name;
    if (name == "uvm") {
        // Uncertain volatility: the control is the (clamped) lognormal vol.
        m.control_set = {{0.2}, 0.1};
        const ControlSet ball = m.control_set;
        m.drift = [](const double*, const double*, double* out) { out[0] = 0.0; };
        m.diffusion = [ball](const double* x, const double* a, double* out) {
            out[0] = surjection_h1(a[0], ball) * x[0];
        };
        m.intensity.total_rate = [](const double*) { return 0.0; };
        m.intensity.rate_bound = 0.0;
        m.running_cost = [](const double*, const double*) { return 0.0; };
        m.terminal_cost = [](const double* x) { return std::max(x[0] - 100.0, 0.0); };
    } else if (name == "nondominated-jump") {
        // Non-dominated family {delta_a}: unit-rate jumps of size h(a).
        m.control_set = {{1.0}, 0.5};
        const ControlSet ball = m.control_set;
        m.drift = [](const double*, const double*, double* out) { out[0] = 0.0; };
        m.diffusion = [](const double*, const double*, double* out) { out[0] = 0.0; };
        m.jump_size = [](const double*, const double*, double mark, double* out) {
            out[0] = mark;
        };
        m.intensity.total_rate = [](const double*) { return 1.0; };
        m.intensity.rate_bound = 1.0;
        m.intensity.mark_sampler = [ball](const double* a, double) {
            return surjection_h1(a[0], ball);
        };
        m.intensity.atoms = [ball](const double* a) {
            return std::vector<Atom>{{surjection_h1(a[0], ball), 1.0}};
        };
        m.running_cost = [](const double*, const double*) { return 0.0; };
        m.terminal_cost = [](const double* x) { return std::abs(x[0]); };
    } else if (name == "trivial-drift") {
        m.control_set = {{0.0}, 1.0};
        m.drift = [](const double*, const double*, double* out) { out[0] = 1.0; };
        m.diffusion = [](const double*, const double*, double* out) { out[0] = 0.0; };
        m.intensity.total_rate = [](const double*) { return 0.0; };
        m.intensity.rate_bound = 0.0;
        m.running_cost = [](const double*, const double*) { return 0.0; };
        m.terminal_cost = [](const double* x) { return x[0]; };
    } else {
        throw std::invalid_argument("unknown model '" + name + "'");
    }
    return m;
}

namespace {

double norm_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

AssumptionReport validate_model(const ControlledModel& model, int budget, uint64_t seed,
                                const ValidateOptions& opts) {
    const int d = model.dim_x, q = model.dim_a;
    AssumptionReport rep;
    std::vector<double> x1(size_t(d), 0.0), x2(size_t(d), 0.0), a(size_t(q), 0.0);
    std::vector<double> f1(size_t(d), 0.0), f2(size_t(d), 0.0), s1(size_t(d * d), 0.0), s2(size_t(d * d), 0.0);

    for (int i = 0; i < budget; ++i) {
        for (int j = 0; j < d; ++j) {
            x1[size_t(j)] =
                opts.x_range * (2.0 * rng::uniform(seed, rng::Purpose::validation, uint64_t(i), 0,
                                                   uint32_t(j)) -
                                1.0);
            x2[size_t(j)] =
                opts.x_range * (2.0 * rng::uniform(seed, rng::Purpose::validation, uint64_t(i), 1,
                                                   uint32_t(j)) -
                                1.0);
        }
        for (int j = 0; j < q; ++j) {
            const double u =
                rng::uniform(seed, rng::Purpose::validation, uint64_t(i), 2, uint32_t(j));
            a[size_t(j)] = model.control_set.center[size_t(j)] +
                           model.control_set.radius * (2.0 * u - 1.0);
        }
        std::vector<double> dx(size_t(d), 0.0);
        for (int j = 0; j < d; ++j) dx[size_t(j)] = x1[size_t(j)] - x2[size_t(j)];
        const double denom = std::max(norm_of(dx), 1e-12);

        if (model.drift) {
            model.drift(x1.data(), a.data(), f1.data());
            model.drift(x2.data(), a.data(), f2.data());
            for (int j = 0; j < d; ++j) f1[size_t(j)] -= f2[size_t(j)];
            rep.lipschitz_b = std::max(rep.lipschitz_b, norm_of(f1) / denom);
        }
        if (model.diffusion) {
            model.diffusion(x1.data(), a.data(), s1.data());
            model.diffusion(x2.data(), a.data(), s2.data());
            double diff2 = 0.0;
            for (size_t j = 0; j < s1.size(); ++j) {
                const double u = s1[j] - s2[j];
                diff2 += u * u;
            }
            rep.lipschitz_sigma = std::max(rep.lipschitz_sigma, std::sqrt(diff2) / denom);
        }
        if (model.jump_size && model.intensity.is_atomic()) {
            for (const auto& atom : model.intensity.atoms(a.data())) {
                model.jump_size(x1.data(), a.data(), atom.mark, f1.data());
                model.jump_size(x2.data(), a.data(), atom.mark, f2.data());
                for (int j = 0; j < d; ++j) f1[size_t(j)] -= f2[size_t(j)];
                rep.lipschitz_beta = std::max(rep.lipschitz_beta, norm_of(f1) / denom);
            }
        }
        if (model.terminal_cost) {
            rep.growth_g = std::max(rep.growth_g, std::abs(model.terminal_cost(x1.data())) /
                                                      (1.0 + norm_of(x1)));
        }
        if (model.intensity.total_rate) {
            rep.max_rate_seen = std::max(rep.max_rate_seen, model.intensity.total_rate(a.data()));
        }
    }
    const double lip =
        std::max(rep.lipschitz_b, std::max(rep.lipschitz_sigma, rep.lipschitz_beta));
    rep.lipschitz_flag = lip > opts.lipschitz_cap;
    rep.growth_flag = rep.growth_g > opts.growth_cap;
    rep.rate_flag = rep.max_rate_seen > model.intensity.rate_bound + 1e-12;
    return rep;
}

}  // namespace rcbsde
