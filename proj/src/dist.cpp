#include "fluidq/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace fluidq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double phi_normal(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::Exponential: return "exponential";
        case Family::Weibull: return "weibull";
        case Family::HyperExponential: return "hyperexponential";
        case Family::LogNormal: return "lognormal";
        case Family::GriddedDensity: return "gridded-density";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "exponential") return Family::Exponential;
    if (name == "weibull") return Family::Weibull;
    if (name == "hyperexponential") return Family::HyperExponential;
    if (name == "lognormal") return Family::LogNormal;
    if (name == "gridded-density" || name == "gridded") return Family::GriddedDensity;
    throw ConfigError("unknown distribution family: " + name);
}

// Piecewise-linear density on a uniform grid; CDF is piecewise quadratic and the
// integrated survival piecewise cubic, all kept in closed form per cell.
struct Distribution::GridData {
    double dx = 0.0;
    std::vector<double> v;     // density values at nodes
    std::vector<double> G;     // CDF at nodes
    std::vector<double> IS;    // ∫_0^{x_i} Gbar
    double mean = 0.0;

    void build() {
        const size_t n = v.size();
        G.assign(n, 0.0);
        for (size_t i = 0; i + 1 < n; ++i)
            G[i + 1] = G[i] + 0.5 * dx * (v[i] + v[i + 1]);
        const double total = G[n - 1];
        if (total <= 0.0) throw ConfigError("gridded density has zero total mass");
        for (auto& x : v) x /= total;
        for (auto& x : G) x /= total;
        G[n - 1] = 1.0;
        IS.assign(n, 0.0);
        mean = 0.0;
        for (size_t i = 0; i + 1 < n; ++i) {
            const double dv = v[i + 1] - v[i];
            // ∫ cell Gbar with G quadratic inside the cell
            IS[i + 1] = IS[i] + dx * (1.0 - G[i]) - v[i] * dx * dx / 2.0 - dv * dx * dx / 6.0;
            // ∫_0^dx (a+u)(v_i + dv*u/dx) du, exact for the linear density
            const double a = double(i) * dx;
            mean += a * v[i] * dx + a * dv * dx / 2.0 + v[i] * dx * dx / 2.0 + dv * dx * dx / 3.0;
        }
    }

    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        const double H = dx * double(v.size() - 1);
        if (x >= H) return 1.0;
        const size_t i = size_t(x / dx);
        const double u = x - double(i) * dx;
        const double dv = v[i + 1] - v[i];
        return G[i] + v[i] * u + dv * u * u / (2.0 * dx);
    }
    double dens(double x) const {
        if (x < 0.0) return 0.0;
        const double H = dx * double(v.size() - 1);
        if (x >= H) return 0.0;
        const size_t i = size_t(x / dx);
        const double u = x - double(i) * dx;
        return v[i] + (v[i + 1] - v[i]) * u / dx;
    }
    double intsurv(double x) const {
        if (x <= 0.0) return 0.0;
        const double H = dx * double(v.size() - 1);
        if (x >= H) return IS.back();
        const size_t i = size_t(x / dx);
        const double u = x - double(i) * dx;
        const double dv = v[i + 1] - v[i];
        return IS[i] + (1.0 - G[i]) * u - v[i] * u * u / 2.0 - dv * u * u * u / (6.0 * dx);
    }
    double invcdf(double p) const {
        if (p <= 0.0) return 0.0;
        if (p >= 1.0) return dx * double(v.size() - 1);
        const auto it = std::lower_bound(G.begin(), G.end(), p);
        size_t i = size_t(it - G.begin());
        if (i > 0) --i;
        // solve G[i] + v_i u + dv u^2/(2dx) = p on the cell by bisection
        double lo = 0.0, hi = dx;
        for (int k = 0; k < 60; ++k) {
            const double mid = 0.5 * (lo + hi);
            const double dv = v[i + 1] - v[i];
            const double val = G[i] + v[i] * mid + dv * mid * mid / (2.0 * dx);
            (val < p ? lo : hi) = mid;
        }
        return double(i) * dx + 0.5 * (lo + hi);
    }
};

Distribution Distribution::exponential(double rate) {
    if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
    Distribution d;
    d.family_ = Family::Exponential;
    d.params_ = {rate};
    return d;
}

Distribution Distribution::weibull(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw ConfigError("weibull shape/scale must be positive");
    Distribution d;
    d.family_ = Family::Weibull;
    d.params_ = {shape, scale};
    return d;
}

Distribution Distribution::hyperexponential(std::vector<double> probs, std::vector<double> rates) {
    if (probs.empty() || probs.size() != rates.size())
        throw ConfigError("hyperexponential needs matching, nonempty probs and rates");
    double psum = 0.0;
    for (double p : probs) {
        if (!(p > 0.0)) throw ConfigError("hyperexponential probabilities must be positive");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-9) throw ConfigError("hyperexponential probabilities must sum to 1");
    for (double& p : probs) p /= psum;
    for (double r : rates)
        if (!(r > 0.0)) throw ConfigError("hyperexponential rates must be positive");
    Distribution d;
    d.family_ = Family::HyperExponential;
    d.params_ = probs;
    d.params_.insert(d.params_.end(), rates.begin(), rates.end());
    return d;
}

Distribution Distribution::lognormal(double mu, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("lognormal sigma must be positive");
    Distribution d;
    d.family_ = Family::LogNormal;
    d.params_ = {mu, sigma};
    return d;
}

Distribution Distribution::gridded(double dx, std::vector<double> values) {
    if (!(dx > 0.0)) throw ConfigError("gridded density dx must be positive");
    if (values.size() < 2) throw ConfigError("gridded density needs at least two nodes");
    for (double v : values)
        if (v < 0.0 || !std::isfinite(v)) throw ConfigError("gridded density values must be finite and >= 0");
    auto gd = std::make_shared<GridData>();
    gd->dx = dx;
    gd->v = std::move(values);
    gd->build();
    Distribution d;
    d.family_ = Family::GriddedDensity;
    d.grid_ = gd;
    return d;
}

double Distribution::support_end() const {
    if (family_ == Family::GriddedDensity) return grid_->dx * double(grid_->v.size() - 1);
    return kInf;
}

double Distribution::survival(double x) const {
    if (x <= 0.0) return 1.0;
    switch (family_) {
        case Family::Exponential: return std::exp(-params_[0] * x);
        case Family::Weibull: return std::exp(-std::pow(x / params_[1], params_[0]));
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            double s = 0.0;
            for (size_t i = 0; i < k; ++i) s += params_[i] * std::exp(-params_[k + i] * x);
            return s;
        }
        case Family::LogNormal:
            return 0.5 * std::erfc((std::log(x) - params_[0]) / (params_[1] * std::sqrt(2.0)));
        case Family::GriddedDensity: return 1.0 - grid_->cdf(x);
    }
    return 0.0;
}

double Distribution::log_survival(double x) const {
    if (x <= 0.0) return 0.0;
    switch (family_) {
        case Family::Exponential: return -params_[0] * x;
        case Family::Weibull: return -std::pow(x / params_[1], params_[0]);
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            double rmin = params_[k];
            for (size_t i = 1; i < k; ++i) rmin = std::min(rmin, params_[k + i]);
            double s = 0.0;
            for (size_t i = 0; i < k; ++i) s += params_[i] * std::exp(-(params_[k + i] - rmin) * x);
            return -rmin * x + std::log(s);
        }
        default: {
            const double s = survival(x);
            return s > 0.0 ? std::log(s) : -kInf;
        }
    }
}

double Distribution::survival_ratio(double x, double t) const {
    if (t <= 0.0) return 1.0;
    switch (family_) {
        case Family::Exponential: return std::exp(-params_[0] * t);
        case Family::Weibull:
        case Family::HyperExponential: {
            const double l = log_survival(x + t) - log_survival(x);
            return std::isfinite(l) ? std::exp(l) : 0.0;
        }
        default: {
            const double sx = survival(x);
            if (sx <= 0.0) return 0.0;
            return survival(x + t) / sx;
        }
    }
}

double Distribution::density(double x) const {
    if (x < 0.0) return 0.0;
    switch (family_) {
        case Family::Exponential: return params_[0] * std::exp(-params_[0] * x);
        case Family::Weibull: {
            const double k = params_[0], s = params_[1];
            if (x == 0.0) {
                if (k > 1.0) return 0.0;
                if (k == 1.0) return 1.0 / s;
                return kInf;
            }
            const double z = x / s;
            return (k / s) * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
        }
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            double s = 0.0;
            for (size_t i = 0; i < k; ++i)
                s += params_[i] * params_[k + i] * std::exp(-params_[k + i] * x);
            return s;
        }
        case Family::LogNormal: {
            if (x <= 0.0) return 0.0;
            const double mu = params_[0], sg = params_[1];
            const double z = (std::log(x) - mu) / sg;
            return std::exp(-0.5 * z * z) / (x * sg * std::sqrt(2.0 * M_PI));
        }
        case Family::GriddedDensity: return grid_->dens(x);
    }
    return 0.0;
}

double Distribution::hazard(double x) const {
    const double s = survival(x);
    if (s <= 0.0) return kInf;
    return density(x) / s;
}

double Distribution::integrated_survival(double x) const {
    if (x <= 0.0) return 0.0;
    switch (family_) {
        case Family::Exponential: return (1.0 - std::exp(-params_[0] * x)) / params_[0];
        case Family::Weibull: {
            const double k = params_[0], s = params_[1];
            const double z = std::pow(x / s, k);
            // ∫_0^x e^{-(u/s)^k} du = s Γ(1+1/k) P(1/k, z)
            return s * std::tgamma(1.0 + 1.0 / k) * boost::math::gamma_p(1.0 / k, z);
        }
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            double s = 0.0;
            for (size_t i = 0; i < k; ++i)
                s += params_[i] * (1.0 - std::exp(-params_[k + i] * x)) / params_[k + i];
            return s;
        }
        case Family::LogNormal: {
            const double mu = params_[0], sg = params_[1];
            // x Gbar(x) + E[X 1_{X<=x}]
            return x * survival(x) +
                   std::exp(mu + sg * sg / 2.0) * phi_normal((std::log(x) - mu - sg * sg) / sg);
        }
        case Family::GriddedDensity: return grid_->intsurv(x);
    }
    return 0.0;
}

double Distribution::mean() const {
    switch (family_) {
        case Family::Exponential: return 1.0 / params_[0];
        case Family::Weibull: return params_[1] * std::tgamma(1.0 + 1.0 / params_[0]);
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            double m = 0.0;
            for (size_t i = 0; i < k; ++i) m += params_[i] / params_[k + i];
            return m;
        }
        case Family::LogNormal: return std::exp(params_[0] + params_[1] * params_[1] / 2.0);
        case Family::GriddedDensity: return grid_->mean;
    }
    return 0.0;
}

Distribution Distribution::rescaled_to_mean(double m) const {
    if (!(m > 0.0)) throw ConfigError("target mean must be positive");
    const double c = m / mean();
    switch (family_) {
        case Family::Exponential: return exponential(params_[0] / c);
        case Family::Weibull: return weibull(params_[0], params_[1] * c);
        case Family::HyperExponential: {
            const size_t k = params_.size() / 2;
            std::vector<double> p(params_.begin(), params_.begin() + k);
            std::vector<double> r(params_.begin() + k, params_.end());
            for (auto& x : r) x /= c;
            return hyperexponential(std::move(p), std::move(r));
        }
        case Family::LogNormal: return lognormal(params_[0] + std::log(c), params_[1]);
        case Family::GriddedDensity: {
            std::vector<double> v = grid_->v;
            for (auto& x : v) x /= c;
            return gridded(grid_->dx * c, std::move(v));
        }
    }
    throw ConfigError("unreachable");
}

double Distribution::sample(double u) const {
    u = std::min(std::max(u, 1e-300), 1.0 - 1e-16);
    switch (family_) {
        case Family::Exponential: return -std::log(1.0 - u) / params_[0];
        case Family::Weibull:
            return params_[1] * std::pow(-std::log(1.0 - u), 1.0 / params_[0]);
        case Family::HyperExponential: {
            // split the uniform: low bits pick the branch, remainder drives the exponential
            const size_t k = params_.size() / 2;
            double acc = 0.0;
            for (size_t i = 0; i < k; ++i) {
                const double next = acc + params_[i];
                if (u < next || i + 1 == k) {
                    const double w = (u - acc) / params_[i];
                    const double ww = std::min(std::max(w, 1e-300), 1.0 - 1e-16);
                    return -std::log(1.0 - ww) / params_[k + i];
                }
                acc = next;
            }
            return 0.0;
        }
        case Family::LogNormal: {
            const double z = -boost::math::erfc_inv(2.0 * u) * std::sqrt(2.0);
            return std::exp(params_[0] + params_[1] * z);
        }
        case Family::GriddedDensity: return grid_->invcdf(u);
    }
    return 0.0;
}

double Distribution::grid_dx() const {
    if (family_ != Family::GriddedDensity) throw ConfigError("not a gridded-density law");
    return grid_->dx;
}
const std::vector<double>& Distribution::grid_values() const {
    if (family_ != Family::GriddedDensity) throw ConfigError("not a gridded-density law");
    return grid_->v;
}

bool Distribution::same_law(const Distribution& other, double tol) const {
    if (family_ != other.family_) return false;
    if (family_ == Family::GriddedDensity)
        return grid_ == other.grid_;
    if (params_.size() != other.params_.size()) return false;
    for (size_t i = 0; i < params_.size(); ++i)
        if (std::abs(params_[i] - other.params_[i]) > tol) return false;
    return true;
}

namespace {

std::vector<double> default_scan_grid(const Distribution& d) {
    // 10^4-point log-spaced scan from 1e-6 out to where the survival is ~1e-9,
    // clipped inside the support for finite-support laws.
    double hi;
    if (std::isfinite(d.support_end())) {
        hi = d.support_end() * (1.0 - 1e-6);
    } else {
        hi = 1.0;
        while (d.survival(hi) > 1e-9 && hi < 1e12) hi *= 2.0;
    }
    const double lo = std::min(1e-6, hi / 1e6);
    const int n = 10000;
    std::vector<double> g(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i) g[i] = std::exp(llo + (lhi - llo) * double(i) / double(n - 1));
    return g;
}

bool scan_decreasing(const Distribution& d, const std::vector<double>& grid) {
    double prev = kInf;
    for (double x : grid) {
        const double h = d.hazard(x);
        if (!std::isfinite(h)) continue;
        if (h > prev + 1e-10) return false;
        prev = h;
    }
    return true;
}

}  // namespace

HazardRegime classify_hazard(const Distribution& d, std::vector<double> scan_grid) {
    if (scan_grid.empty()) scan_grid = default_scan_grid(d);
    HazardRegime r;
    r.scan_grid = scan_grid;
    switch (d.family()) {
        case Family::Exponential: {
            const double rate = d.params()[0];
            r.eps_h = rate;
            r.c_h = rate;
            r.is_decreasing = true;
            r.is_bounded_away = true;
            return r;
        }
        case Family::Weibull: {
            const double k = d.params()[0];
            if (k == 1.0) return classify_hazard(Distribution::exponential(1.0 / d.params()[1]), scan_grid);
            r.eps_h = 0.0;
            r.c_h = kInf;
            r.is_decreasing = (k < 1.0);
            r.is_bounded_away = false;
            return r;
        }
        case Family::HyperExponential: {
            const auto& p = d.params();
            const size_t k = p.size() / 2;
            double rmin = p[k], h0 = 0.0;
            for (size_t i = 0; i < k; ++i) {
                rmin = std::min(rmin, p[k + i]);
                h0 += p[i] * p[k + i];
            }
            r.eps_h = rmin;
            r.c_h = h0;
            r.is_decreasing = scan_decreasing(d, scan_grid);  // true for any exponential mixture
            r.is_bounded_away = true;
            return r;
        }
        case Family::LogNormal: {
            double hmax = 0.0;
            for (double x : scan_grid) hmax = std::max(hmax, d.hazard(x));
            r.eps_h = 0.0;  // lognormal hazard decays to zero
            r.c_h = hmax;
            r.is_decreasing = false;
            r.is_bounded_away = false;
            return r;
        }
        case Family::GriddedDensity: {
            double hmin = kInf, hmax = 0.0;
            for (double x : scan_grid) {
                const double h = d.hazard(x);
                if (!std::isfinite(h)) continue;
                hmin = std::min(hmin, h);
                hmax = std::max(hmax, h);
            }
            r.eps_h = std::isfinite(hmin) ? hmin : 0.0;
            // finite support: the hazard blows up approaching H, so never claim boundedness
            r.c_h = kInf;
            r.is_decreasing = scan_decreasing(d, scan_grid);
            r.is_bounded_away = false;
            return r;
        }
    }
    return r;
}

Distribution make_distribution(const DistSpec& spec, Role role) {
    Distribution d = [&]() {
        switch (spec.family) {
            case Family::Exponential:
                if (spec.params.size() != 1) throw ConfigError("exponential expects params {rate}");
                return Distribution::exponential(spec.params[0]);
            case Family::Weibull:
                if (spec.params.empty() || spec.params.size() > 2)
                    throw ConfigError("weibull expects params {shape[, scale]}");
                return Distribution::weibull(spec.params[0],
                                             spec.params.size() == 2 ? spec.params[1] : 1.0);
            case Family::HyperExponential: {
                if (spec.params.size() < 4 || spec.params.size() % 2 != 0)
                    throw ConfigError("hyperexponential expects params {p..., r...}");
                const size_t k = spec.params.size() / 2;
                return Distribution::hyperexponential(
                    std::vector<double>(spec.params.begin(), spec.params.begin() + k),
                    std::vector<double>(spec.params.begin() + k, spec.params.end()));
            }
            case Family::LogNormal:
                if (spec.params.size() != 2) throw ConfigError("lognormal expects params {mu, sigma}");
                return Distribution::lognormal(spec.params[0], spec.params[1]);
            case Family::GriddedDensity:
                return Distribution::gridded(spec.grid_dx, spec.grid_values);
        }
        throw ConfigError("unknown family");
    }();

    if (!std::isfinite(d.mean()) || !(d.mean() > 0.0))
        throw ConfigError("distribution must have a positive finite mean");
    if (role == Role::Service) d = d.rescaled_to_mean(1.0);
    return d;
}

}  // namespace fluidq
