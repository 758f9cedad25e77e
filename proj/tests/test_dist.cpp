#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fluidq/dist.hpp"
#include "support/oracles.hpp"

using namespace fluidq;

TEST_CASE("exponential closed forms") {
    auto d = Distribution::exponential(1.0);
    CHECK(d.survival(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(d.hazard(0.3) == doctest::Approx(1.0));
    CHECK(d.hazard(7.0) == doctest::Approx(1.0));
    CHECK(d.mean() == doctest::Approx(1.0));
    CHECK(d.integrated_survival(2.0) == doctest::Approx(1.0 - std::exp(-2.0)));
}

TEST_CASE("weibull service rescales to mean one and has decreasing hazard for shape < 1") {
    auto d = make_distribution({Family::Weibull, {0.5}}, Role::Service);
    CHECK(d.mean() == doctest::Approx(1.0).epsilon(1e-12));
    // oracle: numeric mean from the survival integral
    const double m = oracles::integrate([&](double x) { return d.survival(x); }, 0.0, 400.0, 1e-11);
    CHECK(m == doctest::Approx(1.0).epsilon(1e-8));
    auto reg = classify_hazard(d);
    CHECK(reg.is_decreasing);
    CHECK_FALSE(reg.is_bounded_away);
    CHECK(reg.eps_h == 0.0);
}

TEST_CASE("hyperexponential mean normalization against quadrature oracle") {
    auto d = make_distribution({Family::HyperExponential, {0.5, 0.5, 0.5, 2.0}}, Role::Service);
    const double m = oracles::integrate([&](double x) { return d.survival(x); }, 0.0, 200.0, 1e-12);
    CHECK(std::abs(m - 1.0) < 1e-8);
    CHECK(d.integrated_survival(1e9) == doctest::Approx(1.0).epsilon(1e-12));

    auto reg = classify_hazard(d);
    CHECK(reg.is_decreasing);  // exponential mixtures have decreasing hazard; grid scan confirms
    CHECK(reg.is_bounded_away);
    CHECK(reg.eps_h > 0.0);
    CHECK(reg.c_h < 10.0);
    // h(0) = sum p_i r_i for the rescaled rates
    CHECK(reg.c_h == doctest::Approx(d.hazard(0.0)).epsilon(1e-9));
}

TEST_CASE("hazard regime closed forms") {
    auto exp1 = Distribution::exponential(1.0);
    auto reg = classify_hazard(exp1);
    CHECK(reg.eps_h == doctest::Approx(1.0));
    CHECK(reg.c_h == doctest::Approx(1.0));
    CHECK(reg.is_decreasing);
    CHECK(reg.is_bounded_away);

    auto w2 = make_distribution({Family::Weibull, {2.0}}, Role::Service);
    auto reg2 = classify_hazard(w2);
    CHECK_FALSE(reg2.is_decreasing);
    CHECK(reg2.eps_h == 0.0);
    CHECK_FALSE(reg2.is_bounded_away);
}

TEST_CASE("survival equals exp(-integrated hazard) across families") {
    const DistSpec specs[] = {
        {Family::Exponential, {0.7}},
        {Family::Weibull, {1.7, 1.3}},
        {Family::HyperExponential, {0.3, 0.7, 0.4, 2.5}},
        {Family::LogNormal, {0.1, 0.8}},
    };
    for (const auto& spec : specs) {
        auto d = make_distribution(spec, Role::Patience);
        for (double x : {0.2, 0.9, 2.1, 4.0}) {
            const double ih =
                oracles::integrate([&](double u) { return d.hazard(u); }, 1e-12, x, 1e-12);
            CHECK(std::abs(d.survival(x) - std::exp(-ih)) < 1e-6);
        }
    }
}

TEST_CASE("density integrates to one") {
    const DistSpec specs[] = {
        {Family::Exponential, {2.0}},
        {Family::Weibull, {0.8, 1.0}},
        {Family::HyperExponential, {0.5, 0.5, 1.0, 3.0}},
        {Family::LogNormal, {-0.3, 0.5}},
    };
    for (const auto& spec : specs) {
        auto d = make_distribution(spec, Role::Patience);
        double hi = 1.0;
        while (d.survival(hi) > 1e-13) hi *= 2.0;
        const double total =
            oracles::integrate([&](double x) { return d.density(x); }, 1e-13, hi, 1e-11);
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("rescaling preserves hazard monotonicity flags") {
    auto raw = Distribution::weibull(0.5, 3.0);
    auto scaled = raw.rescaled_to_mean(1.0);
    auto r1 = classify_hazard(raw);
    auto r2 = classify_hazard(scaled);
    CHECK(r1.is_decreasing == r2.is_decreasing);
    CHECK(r1.is_bounded_away == r2.is_bounded_away);

    auto he = Distribution::hyperexponential({0.4, 0.6}, {0.5, 4.0});
    auto he2 = he.rescaled_to_mean(1.0);
    CHECK(classify_hazard(he).is_decreasing == classify_hazard(he2).is_decreasing);
}

TEST_CASE("gridded density round trip and consistency") {
    // triangular density on [0, 2]
    std::vector<double> v;
    const double dx = 0.001;
    for (int i = 0; i <= 2000; ++i) {
        const double x = dx * double(i);
        v.push_back(x <= 1.0 ? x : 2.0 - x);
    }
    auto d = Distribution::gridded(dx, v);
    CHECK(d.cdf(1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(d.support_end() == doctest::Approx(2.0));
    CHECK(d.mean() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.integrated_survival(2.0) ==
          doctest::Approx(oracles::integrate([&](double x) { return d.survival(x); }, 0.0, 2.0))
              .epsilon(1e-9));
    // inverse sampling hits the right quantiles
    CHECK(d.sample(0.5) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(Distribution::exponential(0.0), ConfigError);
    CHECK_THROWS_AS(Distribution::hyperexponential({0.5, 0.6}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(Distribution::gridded(0.1, {0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(make_distribution({Family::Weibull, {0.5, 1.0, 2.0}}, Role::Service),
                    ConfigError);
}
