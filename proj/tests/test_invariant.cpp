#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fluidq/fluid.hpp"
#include "fluidq/invariant.hpp"
#include "support/oracles.hpp"

using namespace fluidq;

TEST_CASE("subcritical branch of the invariant manifold") {
    auto st = invariant_state(0.5, Distribution::exponential(1.0), Distribution::exponential(1.0));
    CHECK(st.x_star == doctest::Approx(0.5));
    CHECK(st.x_l == st.x_r);
    CHECK(st.unique);
    CHECK(st.nu_component.mass() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(st.eta_component.mass() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("supercritical exponential patience: x* = 1 + (lambda-1)/theta") {
    // oracle: G_r(a) = 1/2 gives a = log 2; x - 1 = F^{2 eta*}(log 2) = 2(1 - 1/2) = 1
    auto st = invariant_state(2.0, Distribution::exponential(1.0), Distribution::exponential(1.0));
    CHECK(st.x_star == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(st.unique);
    CHECK(st.nu_mass == doctest::Approx(1.0));
    CHECK(st.eta_mass == doctest::Approx(2.0));

    auto st2 = invariant_state(1.5, Distribution::exponential(1.0), Distribution::exponential(2.0));
    CHECK(st2.x_star == doctest::Approx(1.0 + 0.5 / 2.0).epsilon(1e-9));

    // fixed-point equation residual at the endpoints
    for (double x : {st.x_l, st.x_r}) {
        const double q = x - 1.0;
        // invert F^{2 eta*}(a) = 2(1 - e^{-a}) at q, then apply G_r
        const double a = -std::log(1.0 - q / 2.0);
        CHECK(std::abs((1.0 - std::exp(-a)) - 0.5) < 1e-8);
    }
}

TEST_CASE("critical case collapses to x* = 1") {
    auto st = invariant_state(1.0, Distribution::exponential(1.0), Distribution::exponential(1.0));
    CHECK(st.x_star == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(st.unique);
    CHECK(st.x_l == doctest::Approx(1.0));
}

TEST_CASE("interval bounds always hold") {
    for (double lam : {1.0, 1.2, 2.0, 3.5}) {
        auto st = invariant_state(lam, Distribution::exponential(1.0),
                                  Distribution::weibull(1.5, 1.0));
        CHECK(st.x_l <= st.x_r);
        CHECK(st.x_l >= 1.0);
        CHECK(st.x_r <= 1.0 + lam * st.theta_r + 1e-9);
    }
}

TEST_CASE("uniqueness check: strictly increasing vs plateau patience") {
    CHECK(uniqueness_check(2.0, Distribution::exponential(1.0)));
    CHECK(uniqueness_check(1.0 + 1e-6, Distribution::exponential(1.0)));

    // patience with density zero on [1, 2]: cdf plateau at level 1/2; pick lambda
    // so (lambda-1)/lambda = 1/2, i.e. lambda = 2
    const double dx = 0.01;
    std::vector<double> v(301);
    for (int i = 0; i <= 300; ++i) v[size_t(i)] = (i <= 100 || i >= 200) ? 0.5 : 0.0;
    auto plateau = Distribution::gridded(dx, v);
    CHECK(plateau.cdf(1.5) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK_FALSE(uniqueness_check(2.0, plateau));
    // the invariant state reports the interval instead of failing
    auto st = invariant_state(2.0, Distribution::exponential(1.0), plateau);
    CHECK_FALSE(st.unique);
    CHECK(st.x_r - st.x_l > 0.1);
}

TEST_CASE("invariant states are fixed points of the fluid dynamics") {
    for (double lam : {0.5, 2.0}) {
        auto service = Distribution::exponential(1.0);
        auto pat = Distribution::exponential(1.0);
        auto st = invariant_state(lam, service, pat, 0.01, 1e-12);
        FluidConfig cfg{lam, service, pat, st.x_star, st.nu_component, st.eta_component,
                        0.01, 20.0};
        auto traj = solve(cfg);
        double dev = 0.0;
        for (size_t j = 0; j < traj.X.size(); ++j) {
            dev = std::max(dev, std::abs(traj.X[j] - st.x_star));
            dev = std::max(dev, std::abs(traj.B[j] - std::min(lam, 1.0)));
        }
        CHECK(dev < 5.0 * traj.quad_tol);
    }
}
