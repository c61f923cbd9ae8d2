#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rcbsde/regression.hpp"
#include "rcbsde/rng.hpp"

using namespace rcbsde;

namespace {

FeatureTable one_column(const std::vector<double>& x) {
    FeatureTable t;
    t.n_rows = int(x.size());
    t.columns = {x};
    return t;
}

std::vector<double> ramp(int n, double lo, double hi) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / double(n - 1);
    return x;
}

}  // namespace

TEST_CASE("polynomial basis reproduces an in-span cubic exactly") {
    const auto x = ramp(400, -2.0, 2.0);
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        y[i] = 1.5 - 0.75 * x[i] + 0.25 * x[i] * x[i] - 2.0 * x[i] * x[i] * x[i];
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 3;
    const auto r = fit_predict(one_column(x), y, basis);
    for (size_t i = 0; i < x.size(); ++i) CHECK(r.fitted[i] == doctest::Approx(y[i]).epsilon(1e-9));
}

TEST_CASE("polynomial basis recovers a slope under noise") {
    const int n = 20000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng::normal_component(9, rng::Purpose::validation, uint64_t(i), 0, 0);
        y[i] = 3.0 * x[i] + 0.5 * rng::normal_component(9, rng::Purpose::validation, uint64_t(i), 1, 0);
    }
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 1;
    const auto r = fit_predict(one_column(x), y, basis);
    // coefficients are in standardized coordinates; check the fitted line instead
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += x[i] * r.fitted[i];
        den += x[i] * x[i];
    }
    CHECK(num / den == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("a design fits many targets consistently") {
    const auto x = ramp(300, 0.0, 1.0);
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 2;
    const auto table = one_column(x);
    const auto design = build_design(table, basis);
    std::vector<double> y1(x.size()), y2(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        y1[i] = 2.0 + x[i];
        y2[i] = x[i] * x[i];
    }
    const auto f1 = design->fit(y1);
    const auto f2 = design->fit(y2);
    for (size_t i = 0; i < x.size(); ++i) {
        CHECK(f1->fitted()[i] == doctest::Approx(y1[i]).epsilon(1e-9));
        CHECK(f2->fitted()[i] == doctest::Approx(y2[i]).epsilon(1e-9));
    }
    CHECK(f1->n_coefficients() == 3);
}

TEST_CASE("feature budget guards against overfitting") {
    // degree-6 total degree over 3 columns = 84 features; 500 rows < 840
    const int n = 500;
    FeatureTable t;
    t.n_rows = n;
    t.columns = {ramp(n, -1, 1), ramp(n, 0, 2), ramp(n, 1, 3)};
    std::vector<double> y(n, 1.0);
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 6;
    CHECK_THROWS_WITH_AS(fit_predict(t, y, basis), doctest::Contains("exceeds n_paths/10"),
                         std::invalid_argument);
}

TEST_CASE("rank-deficient designs throw or fall back to ridge") {
    const int n = 600;
    const auto x = ramp(n, -1.0, 1.0);
    FeatureTable t;
    t.n_rows = n;
    t.columns = {x, x};  // duplicate column: exact rank deficiency
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = 1.0 + 2.0 * x[i];
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 1;
    basis.ridge_fallback = false;
    CHECK_THROWS_WITH_AS(fit_predict(t, y, basis), "singular design", std::runtime_error);
    basis.ridge_fallback = true;
    const auto r = fit_predict(t, y, basis);
    for (int i = 0; i < n; ++i) CHECK(r.fitted[i] == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("partition basis is a within-cell average") {
    const int n = 4000;
    const auto x = ramp(n, 0.0, 1.0);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = (x[i] < 0.5) ? 1.0 : 3.0;
    BasisSpec basis;
    basis.kind = BasisKind::partition;
    basis.cells_per_dim = 4;
    const auto r = fit_predict(one_column(x), y, basis);
    std::set<double> levels(r.fitted.begin(), r.fitted.end());
    CHECK(levels.size() <= 4);
    double fit_sum = 0.0, y_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        fit_sum += r.fitted[i];
        y_sum += y[i];
        // cell boundaries land exactly on the jump, so the fit is exact
        CHECK(r.fitted[i] == doctest::Approx(y[i]).epsilon(1e-12));
    }
    CHECK(fit_sum == doctest::Approx(y_sum).epsilon(1e-12));
}

TEST_CASE("cellpoly reproduces spanned targets and validates its input") {
    const int n = 20000;
    std::vector<double> x(n), g(n), w(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng::normal_component(4, rng::Purpose::validation, uint64_t(i), 0, 0);
        w[i] = 0.2 + 0.3 * rng::normal_component(4, rng::Purpose::validation, uint64_t(i), 2, 0);
        g[i] = std::abs(x[i]);
    }
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = 2.0 + x[i] + g[i];  // in span: [1, xs, ps]
    FeatureTable t;
    t.n_rows = n;
    t.columns = {x, g, w};
    BasisSpec basis;
    basis.kind = BasisKind::cellpoly;
    basis.ball_center = 0.2;
    basis.ball_radius = 0.1;
    const auto design = build_design(t, basis);
    const auto fit = design->fit(y);
    for (int i = 0; i < n; i += 97) CHECK(fit->fitted()[i] == doctest::Approx(y[i]).epsilon(1e-8));

    const auto noise = fit->noise_scale(y);  // residual of an exact fit is ~0 -> tiny scale
    std::vector<double> resid(n);
    for (int i = 0; i < n; ++i) resid[i] = y[i] - fit->fitted()[i];
    const auto tight = fit->noise_scale(resid);
    for (int i = 0; i < n; i += 211) CHECK(std::abs(tight[i]) < 1e-6);
    CHECK(noise.size() == size_t(n));

    FeatureTable bad;
    bad.n_rows = n;
    bad.columns = {x, g};
    CHECK_THROWS_WITH_AS(build_design(bad, basis),
                         doctest::Contains("cellpoly expects feature columns"),
                         std::invalid_argument);
}

TEST_CASE("predictions stay inside the fitted range far from the data") {
    const auto x = ramp(800, -1.0, 1.0);
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i] * x[i];
    BasisSpec basis;
    basis.kind = BasisKind::polynomial;
    basis.degree = 3;
    const auto design = build_design(one_column(x), basis);
    const auto fit = design->fit(y);
    const auto far = fit->predict(one_column({1e6}));
    const auto farther = fit->predict(one_column({1e9}));
    REQUIRE(far.size() == 1);
    CHECK(far[0] == farther[0]);  // both clamp to the same edge of the fit
    CHECK(far[0] <= 1.0 + 1e-9);
    CHECK(far[0] >= -1.0 - 1e-9);
}
