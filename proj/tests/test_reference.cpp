#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rcbsde/model.hpp"
#include "rcbsde/reference.hpp"

using namespace rcbsde;

TEST_CASE("closed-form call prices are pinned") {
    CHECK(bs_closed_form(100.0, 100.0, 1.0, 0.3) == doctest::Approx(11.923538474).epsilon(1e-9));
    CHECK(bs_closed_form(100.0, 100.0, 1.0, 0.2) == doctest::Approx(7.965567455).epsilon(1e-8));
    // vanishing vol: intrinsic value
    CHECK(bs_closed_form(105.0, 100.0, 1.0, 1e-12) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(bs_closed_form(95.0, 100.0, 1.0, 1e-12) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("poisson series sums the compensated payoff") {
    const auto abs_g = [](double y) { return std::abs(y); };
    // E|N - 1| with N ~ Poisson(1) equals 2/e
    CHECK(poisson_series_value(0.0, 1.0, 1.0, 1.0, abs_g) ==
          doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-12));
    // scaling: E|1.5 (N - 1)| = 1.5 * 2/e, the jump-benchmark corner value
    CHECK(poisson_series_value(0.0, 1.5, 1.0, 1.0, abs_g) ==
          doctest::Approx(1.1036383235143269).epsilon(1e-12));
    // identity payoff: compensation makes the value the start point
    const auto id_g = [](double y) { return y; };
    CHECK(poisson_series_value(0.7, 1.0, 2.0, 1.0, id_g) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(poisson_series_value(0.0, 1.0, 50.0, 1.0, abs_g, 8),
                         doctest::Contains("increase truncation"), std::runtime_error);
}

TEST_CASE("zero coefficients freeze the terminal condition") {
    auto model = make_benchmark("trivial-drift");
    model.drift = [](const double*, const double*, double* out) { out[0] = 0.0; };
    model.terminal_cost = [](const double* x) { return std::cos(x[0]); };
    FdGrid grid;
    grid.x_min = -2.0;
    grid.x_max = 2.0;
    grid.nodes = 101;
    const auto sol = solve_hjb_fd(model, grid);
    REQUIRE(sol.values.size() == 101);
    for (int i = 0; i < 101; ++i) CHECK(sol.values[i] == sol.terminal[i]);
}

TEST_CASE("pure drift transports the payoff") {
    const auto model = make_benchmark("trivial-drift");
    FdGrid grid;
    grid.x_min = -2.0;
    grid.x_max = 4.0;
    grid.nodes = 301;
    const auto sol = solve_hjb_fd(model, grid);
    // u(0, x) = g(x + 1) = x + 1 wherever the cone of dependence stays interior
    CHECK(sol.value_at(0.5) == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(sol.value_at(-0.25) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("insufficient time steps violate the monotonicity bound") {
    const auto model = make_benchmark("uvm");
    FdGrid grid;
    grid.x_min = 20.0;
    grid.x_max = 300.0;
    grid.nodes = 401;
    grid.time_steps = 3;
    CHECK_THROWS_WITH_AS(solve_hjb_fd(model, grid), doctest::Contains("CFL"), std::runtime_error);
}

TEST_CASE("jumps beyond the extrapolation margin are rejected") {
    auto model = make_benchmark("nondominated-jump");
    model.intensity.mark_sampler = [](const double*, double) { return 50.0; };
    model.intensity.atoms = [](const double*) { return std::vector<Atom>{{50.0, 1.0}}; };
    FdGrid grid;
    grid.x_min = -2.0;
    grid.x_max = 4.0;
    grid.nodes = 101;
    CHECK_THROWS_WITH_AS(solve_hjb_fd(model, grid), doctest::Contains("domain too small"),
                         std::runtime_error);
}

TEST_CASE("the small-mark taylor split does not move the answer") {
    auto model = make_benchmark("nondominated-jump");
    model.intensity.atoms = [](const double*) {
        return std::vector<Atom>{{0.8, 0.7}, {1.2, 0.3}};
    };
    model.intensity.total_rate = [](const double*) { return 1.0; };
    FdGrid grid;
    grid.x_min = -9.0;
    grid.x_max = 9.0;
    grid.nodes = 801;
    const auto direct = solve_hjb_fd(model, grid);
    grid.delta_split = 0.4;  // below both marks: the split must select nothing
    const auto split = solve_hjb_fd(model, grid);
    REQUIRE(direct.values.size() == split.values.size());
    for (size_t i = 0; i < direct.values.size(); ++i)
        CHECK(direct.values[i] == split.values[i]);
    CHECK(direct.value_at(1.0) > 1.0);  // sanity: optionality adds value over |x|
}

TEST_CASE("the scheme reproduces the closed-form benchmark price") {
    const auto model = make_benchmark("uvm");
    FdGrid grid;
    grid.x_min = 20.0;
    grid.x_max = 300.0;
    grid.nodes = 401;
    const auto sol = solve_hjb_fd(model, grid);
    const double oracle = bs_closed_form(100.0, 100.0, 1.0, 0.3);
    CHECK(std::abs(sol.value_at(100.0) - oracle) / oracle <= 0.005);
    CHECK(sol.time_steps > 0);
    CHECK(sol.horizon == 1.0);
}
