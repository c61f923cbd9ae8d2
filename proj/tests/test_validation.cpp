#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rcbsde/bsde.hpp"
#include "rcbsde/forward.hpp"
#include "rcbsde/model.hpp"
#include "rcbsde/validation.hpp"

using namespace rcbsde;

TEST_CASE("stat reports derive z and pass from their inputs") {
    const auto r = make_stat_report(0.3, 0.1, 100, 4.0);
    CHECK(r.z_score == doctest::Approx(3.0));
    CHECK(r.pass);
    CHECK(r.n_samples == 100);
    const auto far = make_stat_report(0.5, 0.1, 100, 4.0);
    CHECK_FALSE(far.pass);
    const auto degenerate = make_stat_report(0.0, 0.0, 10, 4.0);
    CHECK(degenerate.pass);  // zero statistic at zero spread is a clean pass
}

TEST_CASE("normal quantile and chi-square tail are pinned") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959964).epsilon(1e-5));
    CHECK(chi_square_pvalue(3.841459, 1) == doctest::Approx(0.05).epsilon(1e-5));
    CHECK(chi_square_pvalue(0.0, 5) == doctest::Approx(1.0));
    CHECK(chi_square_pvalue(100.0, 2) < 1e-12);
}

TEST_CASE("chi-square goodness of fit separates matched and mismatched rates") {
    std::mt19937 gen(12345);
    std::poisson_distribution<int> pois(3.0);
    std::vector<int> counts(20000);
    for (auto& c : counts) c = pois(gen);
    const auto good = chi_square_gof_poisson(counts, 3.0);
    CHECK(good.pass);
    CHECK(good.n_samples == 20000);
    const auto bad = chi_square_gof_poisson(counts, 3.5);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("the laplace functional of the controlled jump measure is one") {
    const auto model = make_benchmark("nondominated-jump");
    const TimeGrid grid{0.0, 1.0, 25};
    const auto ensemble =
        simulate_ensemble(model, grid, 30000, {0.0}, model.control_set.center, 101);

    // statistic is mean(M) - 1
    const MarkTimeFn zero = [](double, double) { return 0.0; };
    const auto trivial = laplace_functional_test(ensemble, model, zero);
    CHECK(trivial.statistic == 0.0);
    CHECK(trivial.std_error == 0.0);
    CHECK(trivial.z_score == 0.0);
    CHECK(trivial.pass);

    const MarkTimeFn ell = [](double t, double e) { return 0.5 + 0.25 * t + 0.1 * e * e; };
    const auto r = laplace_functional_test(ensemble, model, ell);
    CHECK(r.pass);
    CHECK(std::abs(r.statistic) <= 4.0 * r.std_error);
}

TEST_CASE("the laplace functional flags a wrong compensator") {
    auto model = make_benchmark("nondominated-jump");
    const TimeGrid grid{0.0, 1.0, 25};
    const auto ensemble =
        simulate_ensemble(model, grid, 30000, {0.0}, model.control_set.center, 7);
    // inflate the kernel the test integrates against, without touching the paths
    model.intensity.atoms = [ball = model.control_set](const double* a) {
        return std::vector<Atom>{{surjection_h1(a[0], ball), 1.4}};
    };
    const MarkTimeFn ell = [](double, double) { return 0.8; };
    const auto r = laplace_functional_test(ensemble, model, ell);
    CHECK_FALSE(r.pass);
}

TEST_CASE("martingale residuals vanish for an exactly represented problem") {
    const auto model = make_benchmark("trivial-drift");
    const TimeGrid grid{0.0, 1.0, 10};
    BasisSpec basis;
    basis.kind = BasisKind::cellpoly;
    const auto ensemble =
        simulate_ensemble(model, grid, 3000, {0.0}, model.control_set.center, 19);
    const auto sol = backward_solve(model, ensemble, basis, 2.0);
    const auto r = martingale_residual_test(sol, ensemble, model);
    CHECK(r.statistic == 0.0);
    CHECK(r.z_score == 0.0);
    CHECK(r.pass);
}

TEST_CASE("martingale residuals pass production solves and catch corruption") {
    const auto model = make_benchmark("uvm");
    const TimeGrid grid{0.0, 1.0, 25};
    BasisSpec basis;
    basis.kind = BasisKind::cellpoly;
    const auto ensemble =
        simulate_ensemble(model, grid, 20000, {100.0}, model.control_set.center, 1);
    auto sol = backward_solve(model, ensemble, basis, 5.0);
    const auto clean = martingale_residual_test(sol, ensemble, model);
    CHECK(clean.pass);

    for (int p = 0; p < 20000; ++p) sol.Y[5][p] += 0.5;
    const auto broken = martingale_residual_test(sol, ensemble, model);
    CHECK_FALSE(broken.pass);
    CHECK(std::abs(broken.z_score) > std::abs(clean.z_score));
}

TEST_CASE("sweep diagnostics grade synthetic reports") {
    PenaltySweepReport good;
    good.penalties = {1, 2, 4, 8};
    good.values = {1.0, 1.1, 1.15, 1.17};
    good.stderrs = {0.01, 0.01, 0.01, 0.01};
    good.constraint_norms = {0.4, 0.2, 0.1, 0.05};  // slope exactly -1
    good.a_spreads = {0.02, 0.02, 0.02, 0.01};
    good.monotone_flags = {true, true, true};
    const auto g = sweep_diagnostics(good);
    CHECK(g.monotone);
    CHECK(g.constraint_decaying);
    CHECK(g.a_independent);
    CHECK(g.all());
    CHECK(g.constraint_slope == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(g.final_spread_fraction == doctest::Approx(0.01 / 1.17).epsilon(1e-9));

    PenaltySweepReport flat = good;
    flat.constraint_norms = {0.4, 0.38, 0.37, 0.36};  // slope well above -0.5
    CHECK_FALSE(sweep_diagnostics(flat).constraint_decaying);
    CHECK_FALSE(sweep_diagnostics(flat).all());

    PenaltySweepReport wobbly = good;
    wobbly.monotone_flags = {true, false, true};
    CHECK_FALSE(sweep_diagnostics(wobbly).monotone);

    PenaltySweepReport scattered = good;
    scattered.a_spreads = {0.02, 0.02, 0.02, 0.2};  // 17% of the final value
    CHECK_FALSE(sweep_diagnostics(scattered).a_independent);

    PenaltySweepReport rising = good;
    rising.constraint_norms = {0.05, 0.1, 0.2, 0.4};  // increasing: must fail
    CHECK_FALSE(sweep_diagnostics(rising).constraint_decaying);
}
