#include "fluidq/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace fluidq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOverflow = 1e300;
}  // namespace

FiniteMeasure FiniteMeasure::from_atoms(std::vector<Atom> atoms) {
    FiniteMeasure m;
    for (const auto& a : atoms) {
        if (a.x < 0.0 || !(a.mass > 0.0)) throw ConfigError("atom needs location >= 0 and mass > 0");
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    m.atoms_ = std::move(atoms);
    m.refresh_mass();
    return m;
}

FiniteMeasure FiniteMeasure::from_density(double dx, std::vector<double> values) {
    if (!(dx > 0.0)) throw ConfigError("measure grid dx must be positive");
    for (double v : values)
        if (v < 0.0 || !std::isfinite(v)) throw ConfigError("density values must be finite and >= 0");
    FiniteMeasure m;
    m.grid_dx_ = dx;
    m.grid_values_ = std::move(values);
    m.refresh_mass();
    return m;
}

FiniteMeasure FiniteMeasure::shifted(FiniteMeasure base, double t, const Distribution& reweight,
                                     std::string base_ref) {
    if (t < 0.0) throw ConfigError("shift must be >= 0");
    FiniteMeasure m;
    m.shifted_ = std::make_shared<ShiftedPart>(ShiftedPart{
        std::make_shared<FiniteMeasure>(std::move(base)), t, reweight, std::move(base_ref)});
    m.refresh_mass();
    return m;
}

FiniteMeasure FiniteMeasure::with_atoms(std::vector<Atom> atoms) const {
    FiniteMeasure m = *this;
    for (const auto& a : atoms) m.atoms_.push_back(a);
    std::sort(m.atoms_.begin(), m.atoms_.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    m.refresh_mass();
    return m;
}

FiniteMeasure FiniteMeasure::with_density(double dx, std::vector<double> values) const {
    if (has_density()) throw ConfigError("measure already carries a density part");
    FiniteMeasure m = *this;
    m.grid_dx_ = dx;
    m.grid_values_ = std::move(values);
    m.refresh_mass();
    return m;
}

void FiniteMeasure::refresh_mass() {
    mass_ = integrate([](double) { return 1.0; });
}

double FiniteMeasure::integrate(const std::function<double(double)>& psi) const {
    double total = 0.0;
    for (const auto& a : atoms_) total += a.mass * psi(a.x);
    const size_t n = grid_values_.size();
    if (n >= 2) {
        double s = 0.5 * (grid_values_[0] * psi(0.0) +
                          grid_values_[n - 1] * psi(grid_dx_ * double(n - 1)));
        for (size_t i = 1; i + 1 < n; ++i) s += grid_values_[i] * psi(grid_dx_ * double(i));
        total += grid_dx_ * s;
    }
    if (shifted_) {
        const auto& sp = *shifted_;
        total += sp.base->integrate([&](double y) {
            const double r = sp.reweight.survival_ratio(y, sp.shift);
            return r > 0.0 ? r * psi(y + sp.shift) : 0.0;
        });
    }
    return total;
}

double FiniteMeasure::integrate(const TestFunction& psi) const {
    const double v = integrate(psi.fn);
    if (!std::isfinite(v) || std::abs(v) > kOverflow)
        throw NumericalError("test-function integral diverges");
    return v;
}

double FiniteMeasure::integrate_up_to(double a, const std::function<double(double)>& psi) const {
    if (a < 0.0) return 0.0;
    double total = 0.0;
    for (const auto& at : atoms_)
        if (at.x <= a) total += at.mass * psi(at.x);
    const size_t n = grid_values_.size();
    if (n >= 2) {
        const double xmax = grid_dx_ * double(n - 1);
        const double hi = std::min(a, xmax);
        const size_t full = std::min(n - 1, size_t(hi / grid_dx_));
        double s = 0.0;
        for (size_t i = 0; i < full; ++i) {
            s += 0.5 * grid_dx_ *
                 (grid_values_[i] * psi(grid_dx_ * double(i)) +
                  grid_values_[i + 1] * psi(grid_dx_ * double(i + 1)));
        }
        const double left = grid_dx_ * double(full);
        if (hi > left && full + 1 < n) {
            const double u = hi - left;
            const double vl = grid_values_[full];
            const double vr = vl + (grid_values_[full + 1] - vl) * u / grid_dx_;
            s += 0.5 * u * (vl * psi(left) + vr * psi(hi));
        }
        total += s;
    }
    if (shifted_) {
        const auto& sp = *shifted_;
        total += sp.base->integrate_up_to(a - sp.shift, [&](double y) {
            const double r = sp.reweight.survival_ratio(y, sp.shift);
            return r > 0.0 ? r * psi(y + sp.shift) : 0.0;
        });
    }
    return total;
}

double FiniteMeasure::cdf(double x) const {
    return integrate_up_to(x, [](double) { return 1.0; });
}

double FiniteMeasure::support_sup() const {
    double s = 0.0;
    if (!atoms_.empty()) s = std::max(s, atoms_.back().x);
    const size_t n = grid_values_.size();
    if (n >= 2) {
        size_t last = 0;
        for (size_t i = 0; i < n; ++i)
            if (grid_values_[i] > 0.0) last = std::min(i + 1, n - 1);
        s = std::max(s, grid_dx_ * double(last));
    }
    if (shifted_) {
        double b = shifted_->base->support_sup() + shifted_->shift;
        b = std::min(b, shifted_->reweight.support_end());
        s = std::max(s, b);
    }
    return s;
}

double FiniteMeasure::inverse_cdf(double y) const {
    const double tol = 1e-9 * std::max(1.0, mass_);
    if (y > mass_ + tol) throw NumericalError("inverse_cdf: y exceeds total mass");
    if (y <= 0.0) return 0.0;
    double hi = support_sup();
    if (y >= mass_) return hi;
    double lo = 0.0;
    if (cdf(lo) >= y) return lo;
    for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) >= y ? hi : lo) = mid;
    }
    return hi;
}

std::optional<std::vector<double>> FiniteMeasure::grid_on(double dx, size_t n_nodes) const {
    std::vector<double> out(n_nodes, 0.0);
    if (has_density()) {
        if (std::abs(grid_dx_ - dx) > 1e-12 * dx) return std::nullopt;
        for (size_t i = 0; i < std::min(n_nodes, grid_values_.size()); ++i) out[i] = grid_values_[i];
        if (grid_values_.size() > n_nodes) {
            for (size_t i = n_nodes; i < grid_values_.size(); ++i)
                if (grid_values_[i] != 0.0) return std::nullopt;
        }
    }
    if (shifted_) {
        const auto& sp = *shifted_;
        const double ratio_steps = sp.shift / dx;
        const long k = std::lround(ratio_steps);
        if (std::abs(ratio_steps - double(k)) > 1e-9) return std::nullopt;
        if (sp.base->has_atoms() || sp.base->has_shifted()) return std::nullopt;
        if (!sp.base->has_density()) return out;
        if (std::abs(sp.base->grid_dx() - dx) > 1e-12 * dx) return std::nullopt;
        const auto& bv = sp.base->grid_values();
        for (size_t j = 0; j < bv.size(); ++j) {
            const size_t i = j + size_t(k);
            if (i >= n_nodes) break;
            const double y = dx * double(j);
            out[i] += bv[j] * sp.reweight.survival_ratio(y, sp.shift);
        }
    }
    return out;
}

nlohmann::json FiniteMeasure::to_json() const {
    nlohmann::json j;
    j["atoms"] = nlohmann::json::array();
    for (const auto& a : atoms_) j["atoms"].push_back({a.x, a.mass});
    if (has_density()) {
        j["grid"] = {{"dx", grid_dx_}, {"values", grid_values_}};
    } else {
        j["grid"] = nullptr;
    }
    if (shifted_) {
        j["shifted"] = {{"t", shifted_->shift}, {"base_ref", shifted_->base_ref}};
    } else {
        j["shifted"] = nullptr;
    }
    return j;
}

FiniteMeasure FiniteMeasure::from_json(const nlohmann::json& j) {
    if (j.contains("shifted") && !j["shifted"].is_null())
        throw ConfigError("measure with a shifted part cannot be reconstructed from JSON");
    FiniteMeasure m;
    if (j.contains("atoms")) {
        std::vector<Atom> atoms;
        for (const auto& a : j["atoms"]) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        if (!atoms.empty()) m = from_atoms(std::move(atoms));
    }
    if (j.contains("grid") && !j["grid"].is_null()) {
        const double dx = j["grid"].at("dx").get<double>();
        auto values = j["grid"].at("values").get<std::vector<double>>();
        m = m.has_atoms() ? m.with_density(dx, std::move(values))
                          : from_density(dx, std::move(values));
    }
    return m;
}

namespace {

// Exact ∫ |f| over one cell for linear f (handles an interior sign change).
double cell_abs_l1(double a, double b, double dx) {
    if (a == 0.0 && b == 0.0) return 0.0;
    if (a * b >= 0.0) return 0.5 * dx * (std::abs(a) + std::abs(b));
    const double xz = a / (a - b) * dx;
    return 0.5 * (std::abs(a) * xz + std::abs(b) * (dx - xz));
}

}  // namespace

MeasureDistances distances(const FiniteMeasure& mu, const FiniteMeasure& rho) {
    MeasureDistances d;

    // Bounded-Lipschitz proxy: fixed dictionary of 1-Lipschitz functions bounded by 1.
    const double xmax = std::max({mu.support_sup(), rho.support_sup(), 1.0});
    const int nc = 128;
    double bl = std::abs(mu.mass() - rho.mass());  // psi = 1
    for (int i = 0; i <= nc; ++i) {
        const double c = xmax * double(i) / double(nc);
        const auto ramp = [c](double x) { return std::clamp(c - x, -1.0, 1.0); };
        const auto hat = [c](double x) { return std::max(0.0, 1.0 - std::abs(x - c)); };
        bl = std::max(bl, std::abs(mu.integrate(ramp) - rho.integrate(ramp)));
        bl = std::max(bl, std::abs(mu.integrate(hat) - rho.integrate(hat)));
    }
    d.bl = bl;

    // Total variation: |atom mismatch| + ∫|density difference| on a common grid.
    double dx = 0.0;
    if (mu.has_density()) dx = mu.grid_dx();
    if (rho.has_density()) {
        if (dx > 0.0 && std::abs(dx - rho.grid_dx()) > 1e-12 * dx) return d;
        dx = rho.grid_dx();
    }
    if (dx == 0.0) dx = 1.0;  // both purely atomic (or empty)
    const size_t n = size_t(std::ceil(std::max(mu.support_sup(), rho.support_sup()) / dx)) + 2;
    const auto ga = mu.grid_on(dx, n);
    const auto gb = rho.grid_on(dx, n);
    if (!ga || !gb) return d;

    double tv = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) tv += cell_abs_l1((*ga)[i] - (*gb)[i], (*ga)[i + 1] - (*gb)[i + 1], dx);
    size_t ia = 0, ib = 0;
    const auto& aa = mu.atoms();
    const auto& ab = rho.atoms();
    while (ia < aa.size() || ib < ab.size()) {
        if (ib >= ab.size() || (ia < aa.size() && aa[ia].x < ab[ib].x - 1e-12)) {
            tv += aa[ia++].mass;
        } else if (ia >= aa.size() || ab[ib].x < aa[ia].x - 1e-12) {
            tv += ab[ib++].mass;
        } else {
            tv += std::abs(aa[ia].mass - ab[ib].mass);
            ++ia;
            ++ib;
        }
    }
    d.tv = tv;
    return d;
}

namespace {

// Shared driver for the transported-mass and transported-hazard integrals.
// hazard_mode integrates g(x+t)/Gbar(x) by CDF increments on grid cells.
double shifted_term(const FiniteMeasure& mu, const Distribution& d, double t, double cap,
                    bool hazard_mode) {
    if (cap < 0.0) return 0.0;
    double total = 0.0;
    for (const auto& a : mu.atoms()) {
        if (a.x > cap) break;
        const double sb = d.survival(a.x);
        if (sb <= 0.0) continue;
        total += hazard_mode ? a.mass * d.density(a.x + t) / sb
                             : a.mass * d.survival_ratio(a.x, t);
    }
    const auto& v = mu.grid_values();
    const size_t n = v.size();
    if (n >= 2) {
        const double dx = mu.grid_dx();
        const double hi = std::min(cap, dx * double(n - 1));
        const size_t full = std::min(n - 1, size_t(hi / dx));
        // phi(x) = v(x)/Gbar(x), integrated against g(x+t) dx cell by cell
        auto phi = [&](double x, double vv) {
            if (vv == 0.0) return 0.0;
            const double s = d.survival(x);
            if (s <= 0.0) throw NumericalError("density mass beyond the lifetime support");
            return vv / s;
        };
        // Hazard cells use the plain trapezoid where it reproduces the exact CDF
        // increment (keeps the quadrature consistent with the measure's trapezoid
        // mass semantics); steep or singular cells use the CDF increment against
        // the phi average instead.
        auto hazard_cell = [&](double x0, double vl, double x1, double vr, double w) {
            const double dGc = d.survival(x0 + t) - d.survival(x1 + t);
            const double g0 = d.density(x0 + t), g1 = d.density(x1 + t);
            if (std::isfinite(g0) && std::isfinite(g1)) {
                const double trap = 0.5 * w * (g0 + g1);
                if (std::abs(trap - dGc) <= 1e-4 * (std::abs(dGc) + 1e-300))
                    return 0.5 * w * (phi(x0, vl) * g0 + phi(x1, vr) * g1);
            }
            return 0.5 * (phi(x0, vl) + phi(x1, vr)) * dGc;
        };
        double s = 0.0;
        for (size_t i = 0; i < full; ++i) {
            const double x0 = dx * double(i), x1 = x0 + dx;
            if (v[i] == 0.0 && v[i + 1] == 0.0) continue;
            if (hazard_mode) {
                s += hazard_cell(x0, v[i], x1, v[i + 1], dx);
            } else {
                s += 0.5 * dx * (v[i] * d.survival_ratio(x0, t) +
                                 v[i + 1] * d.survival_ratio(x1, t));
            }
        }
        const double left = dx * double(full);
        if (hi > left && full + 1 < n) {
            const double u = hi - left;
            const double vl = v[full];
            const double vr = vl + (v[full + 1] - vl) * u / dx;
            if (vl != 0.0 || vr != 0.0) {
                if (hazard_mode) {
                    s += hazard_cell(left, vl, hi, vr, u);
                } else {
                    s += 0.5 * u * (vl * d.survival_ratio(left, t) +
                                    vr * d.survival_ratio(hi, t));
                }
            }
        }
        total += s;
    }
    if (const auto* sp = mu.shifted_part()) {
        if (sp->reweight.same_law(d)) {
            // ratios telescope: transporting the base by shift+t under the same law
            total += shifted_term(*sp->base, d, t + sp->shift, cap - sp->shift, hazard_mode);
        } else {
            const double tt = t, sh = sp->shift;
            const Distribution rw = sp->reweight;
            total += sp->base->integrate_up_to(cap - sh, [&](double y) {
                const double r = rw.survival_ratio(y, sh);
                if (r <= 0.0) return 0.0;
                const double sb = d.survival(y + sh);
                if (sb <= 0.0) return 0.0;
                return hazard_mode ? r * d.density(y + sh + tt) / sb
                                   : r * d.survival_ratio(y + sh, tt);
            });
        }
    }
    return total;
}

}  // namespace

double shifted_mass_term(const FiniteMeasure& mu, const Distribution& d, double t) {
    return shifted_term(mu, d, t, kInf, false);
}

double shifted_hazard_term(const FiniteMeasure& mu, const Distribution& d, double t) {
    return shifted_term(mu, d, t, kInf, true);
}

double shifted_hazard_term_up_to(const FiniteMeasure& mu, const Distribution& d, double t, double a) {
    return shifted_term(mu, d, t, a, true);
}

}  // namespace fluidq
