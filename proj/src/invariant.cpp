#include "fluidq/invariant.hpp"

#include <algorithm>
#include <cmath>

namespace fluidq {

namespace {

// smallest x with mean - ∫_0^x Gbar < tail_tol
double tail_cutoff(const Distribution& d, double tail_tol) {
    const double m = d.mean();
    if (std::isfinite(d.support_end())) return d.support_end();
    double hi = 1.0;
    while (m - d.integrated_survival(hi) > tail_tol && hi < 1e9) hi *= 2.0;
    return hi;
}

// survival-shaped grid density with trapezoid mass normalized to exactly `target`
FiniteMeasure survival_grid(const Distribution& d, double target, double dx, double tail_tol) {
    const double xmax = tail_cutoff(d, tail_tol);
    const size_t n = size_t(std::ceil(xmax / dx)) + 1;
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = d.survival(dx * double(i));
    double mass = 0.5 * (v.front() + v.back());
    for (size_t i = 1; i + 1 < n; ++i) mass += v[i];
    mass *= dx;
    const double c = target / mass;
    for (auto& x : v) x *= c;
    return FiniteMeasure::from_density(dx, std::move(v));
}

}  // namespace

InvariantState invariant_state(double lambda, const Distribution& service,
                               const Distribution& patience, double dx, double tail_tol) {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (std::abs(service.mean() - 1.0) > 1e-8)
        throw ConfigError("service law must have mean one");
    if (!std::isfinite(patience.mean())) throw ConfigError("patience mean must be finite");

    InvariantState st;
    st.lambda = lambda;
    st.theta_r = patience.mean();
    st.nu_mass = std::min(lambda, 1.0);
    st.eta_mass = lambda * st.theta_r;
    st.nu_component = survival_grid(service, st.nu_mass, dx, tail_tol);
    st.eta_component = survival_grid(patience, st.eta_mass, dx, tail_tol);

    if (lambda < 1.0) {
        st.x_star = st.x_l = st.x_r = lambda;
        st.unique = true;
        return st;
    }

    // F^{lambda eta*}(a) = lambda ∫_0^a Gbar_r, continuous and strictly increasing
    // on the patience support; its right-continuous inverse by bisection.
    const double a_hi = tail_cutoff(patience, 1e-14);
    auto inv_F = [&](double y) {
        if (y <= 0.0) return 0.0;
        if (y >= st.eta_mass) return a_hi;
        double lo = 0.0, hi = a_hi;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (lambda * patience.integrated_survival(mid) >= y ? hi : lo) = mid;
        }
        return hi;
    };
    const double target = (lambda - 1.0) / lambda;
    auto psi = [&](double x) { return patience.cdf(inv_F(std::max(x - 1.0, 0.0))) - target; };

    // bracket: the queue is at most the potential-queue mass, so x <= 1 + lambda*theta_r
    const double xlo = 1.0, xhi = 1.0 + st.eta_mass + 1.0;
    double x_l;
    if (psi(xlo) >= 0.0) {
        x_l = xlo;
    } else {
        double lo = xlo, hi = xhi;
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (psi(mid) >= 0.0 ? hi : lo) = mid;
        }
        x_l = hi;
    }
    double x_r;
    if (psi(xlo) > 0.0) {
        x_r = xlo;
    } else {
        double lo = xlo, hi = xhi;
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (psi(mid) <= 0.0 ? lo : hi) = mid;
        }
        x_r = lo;
    }
    st.x_l = x_l;
    st.x_r = std::max(x_r, x_l);
    st.unique = (st.x_r - st.x_l) < 1e-8;
    st.x_star = 0.5 * (st.x_l + st.x_r);
    return st;
}

bool uniqueness_check(double lambda, const Distribution& patience) {
    if (!(lambda > 1.0)) throw ConfigError("uniqueness_check needs lambda > 1");
    const double c = (lambda - 1.0) / lambda;
    const double hi0 = tail_cutoff(patience, 1e-14);
    double lo = 0.0, hi = hi0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (patience.cdf(mid) >= c ? hi : lo) = mid;
    }
    const double a_l = hi;
    lo = 0.0;
    hi = hi0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (patience.cdf(mid) <= c ? lo : hi) = mid;
    }
    const double a_r = lo;
    return (a_r - a_l) < 1e-8;
}

}  // namespace fluidq
