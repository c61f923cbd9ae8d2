#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rcbsde/model.hpp"

using namespace rcbsde;

TEST_CASE("radial profile hits its calibration points exactly") {
    CHECK(radial_profile(0.0) == 0.0);
    CHECK(radial_profile(1.0) == 1.0);
    CHECK(radial_profile(0.5) == 0.5);
    CHECK(radial_profile(1.7) == 1.0);
    CHECK(radial_profile(-0.3) == 0.0);
}

TEST_CASE("radial profile is monotone with flat contact at the rim") {
    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
        const double s = radial_profile(i / 200.0);
        CHECK(s >= prev);
        prev = s;
    }
    const double h = 1e-4;
    const double d1 = (radial_profile(1.0) - radial_profile(1.0 - h)) / h;
    CHECK(std::abs(d1) < 1e-6);
    const double d2 =
        (radial_profile(1.0) - 2.0 * radial_profile(1.0 - h) + radial_profile(1.0 - 2.0 * h)) /
        (h * h);
    CHECK(std::abs(d2) < 2e-2);
}

TEST_CASE("surjection fixes the center, saturates outside, and stays in the ball") {
    const ControlSet ball{{0.2}, 0.1};
    CHECK(surjection_h1(0.2, ball) == 0.2);
    CHECK(surjection_h1(0.25, ball) == 0.25);  // s(1/2) = 1/2 exactly
    CHECK(surjection_h1(5.0, ball) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(surjection_h1(-5.0, ball) == doctest::Approx(0.1).epsilon(1e-14));
    for (int i = -30; i <= 30; ++i) {
        const double y = surjection_h1(0.2 + 0.01 * i, ball);
        CHECK(y >= 0.1 - 1e-12);
        CHECK(y <= 0.3 + 1e-12);
    }
}

TEST_CASE("surjection preserves direction in higher dimension") {
    const ControlSet ball{{1.0, -2.0}, 0.5};
    const auto y = surjection_h({1.3, -1.6}, ball);
    // direction (0.3, 0.4), norm 0.5 = radius: rim value, s(1) = 1
    CHECK(y[0] == doctest::Approx(1.3).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(-1.6).epsilon(1e-14));
    const auto c = surjection_h(ball.center, ball);
    CHECK(c == ball.center);
}

TEST_CASE("preimage inverts the surjection on the open ball") {
    const ControlSet ball{{1.0, -2.0}, 0.7};
    const std::vector<double> target{1.3, -2.2};
    const auto a = surjection_preimage(target, ball);
    const auto back = surjection_h(a, ball);
    CHECK(std::abs(back[0] - target[0]) <= 1e-10);
    CHECK(std::abs(back[1] - target[1]) <= 1e-10);
    CHECK(surjection_preimage(ball.center, ball) == ball.center);

    CHECK_THROWS_WITH_AS(surjection_preimage({1.7, -2.0}, ball), "not in open ball",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(surjection_preimage({2.5, -2.0}, ball), "not in open ball",
                         std::invalid_argument);
}

TEST_CASE("preimage round-trips random interior targets") {
    const ControlSet ball{{0.2}, 0.1};
    for (int i = 0; i < 1000; ++i) {
        const double y = 0.2 + 0.0999 * ((i % 199) - 99) / 99.0;
        const auto a = surjection_preimage({y}, ball);
        CHECK(std::abs(surjection_h1(a[0], ball) - y) <= 1e-10);
    }
}

TEST_CASE("benchmark registry wires the documented coefficients") {
    const auto uvm = make_benchmark("uvm");
    CHECK(uvm.dim_x == 1);
    CHECK(uvm.dim_a == 1);
    CHECK(uvm.horizon == 1.0);
    CHECK(uvm.control_set.center[0] == 0.2);
    CHECK(uvm.control_set.radius == 0.1);
    CHECK_FALSE(uvm.has_jumps());
    double x = 130.0, a = 0.2, out = 0.0;
    uvm.diffusion(&x, &a, &out);
    CHECK(out == doctest::Approx(26.0));
    CHECK(uvm.terminal_cost(&x) == 30.0);
    x = 80.0;
    CHECK(uvm.terminal_cost(&x) == 0.0);

    const auto jump = make_benchmark("nondominated-jump");
    CHECK(jump.has_jumps());
    CHECK(jump.intensity.is_atomic());
    double aj = 1.0;
    CHECK(jump.intensity.total_rate(&aj) == 1.0);
    const auto atoms = jump.intensity.atoms(&aj);
    REQUIRE(atoms.size() == 1);
    CHECK(atoms[0].mark == doctest::Approx(1.0));
    CHECK(atoms[0].weight == 1.0);
    double xj = -0.4;
    CHECK(jump.terminal_cost(&xj) == 0.4);

    const auto drift = make_benchmark("trivial-drift");
    double xd = 0.0, ad = 0.0, od = -1.0;
    drift.drift(&xd, &ad, &od);
    CHECK(od == 1.0);
    drift.diffusion(&xd, &ad, &od);
    CHECK(od == 0.0);

    CHECK_THROWS_AS(make_benchmark("no-such-model"), std::invalid_argument);
}

TEST_CASE("assumption checks clear the benchmarks") {
    for (const char* name : {"uvm", "nondominated-jump", "trivial-drift"}) {
        CAPTURE(name);
        const auto report = validate_model(make_benchmark(name), 2000, 7);
        CHECK(report.all_clear());
    }
}

TEST_CASE("assumption checks flag violations") {
    auto hot = make_benchmark("nondominated-jump");
    hot.intensity.total_rate = [](const double*) { return 2.5; };  // bound stays 1.0
    CHECK(validate_model(hot, 2000, 7).rate_flag);

    auto steep = make_benchmark("trivial-drift");
    steep.drift = [](const double* x, const double*, double* out) { out[0] = 5.0 * x[0] * x[0]; };
    CHECK(validate_model(steep, 2000, 7).lipschitz_flag);

    auto heavy = make_benchmark("trivial-drift");
    heavy.terminal_cost = [](const double* x) { return std::exp(x[0]); };
    CHECK(validate_model(heavy, 2000, 7).growth_flag);
}
