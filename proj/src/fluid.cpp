#include "fluidq/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace fluidq {

namespace {

// Exact description of eta_t for the solver: analytic fresh part plus prefix
// tables over the (gridded, atomless) eta0 for the transported part.
class EtaView {
public:
    EtaView(const FiniteMeasure& eta0, const Distribution& pat, double lambda, double t)
        : pat_(&pat), lambda_(lambda), t_(t) {
        if (eta0.has_density()) {
            dx0_ = eta0.grid_dx();
            const auto& v = eta0.grid_values();
            const size_t n = v.size();
            cum_mass_.assign(n, 0.0);
            cum_haz_.assign(n, 0.0);
            ratio_.assign(n, 0.0);
            vals_ = &v;
            for (size_t i = 0; i < n; ++i) ratio_[i] = pat.survival_ratio(dx0_ * double(i), t);
            for (size_t i = 0; i + 1 < n; ++i) {
                const double x0 = dx0_ * double(i), x1 = x0 + dx0_;
                cum_mass_[i + 1] =
                    cum_mass_[i] + 0.5 * dx0_ * (v[i] * ratio_[i] + v[i + 1] * ratio_[i + 1]);
                double haz = 0.0;
                if (v[i] != 0.0 || v[i + 1] != 0.0) {
                    haz = 0.5 * (phi(i) + phi(i + 1)) * (pat.survival(x0 + t) - pat.survival(x1 + t));
                }
                cum_haz_[i + 1] = cum_haz_[i] + haz;
            }
        }
    }

    double shifted_mass() const { return cum_mass_.empty() ? 0.0 : cum_mass_.back(); }
    double mass() const { return shifted_mass() + lambda_ * pat_->integrated_survival(t_); }

    double cdf(double x) const {
        return lambda_ * pat_->integrated_survival(std::min(x, t_)) + shifted_cdf(x - t_);
    }

    // ∫_{[0,a]} h_r d eta_t
    double hazard_up_to(double a) const {
        return lambda_ * pat_->cdf(std::min(a, t_)) + shifted_haz(a - t_);
    }

    double potential_rate() const {
        return lambda_ * pat_->cdf(t_) + (cum_haz_.empty() ? 0.0 : cum_haz_.back());
    }

    double support_sup() const {
        double s = std::min(t_, pat_->support_end());
        if (vals_)
            s = std::max(s, std::min(dx0_ * double(vals_->size() - 1) + t_, pat_->support_end()));
        return s;
    }

    // head-of-line age: right-continuous inverse of the cdf at q
    double head_age(double q) const {
        if (q <= 0.0) return 0.0;
        const double m = mass();
        if (q > m * (1.0 + 1e-9) + 1e-12)
            throw NumericalError("queue mass exceeds the potential-queue mass");
        if (q >= m) return support_sup();
        double lo = 0.0, hi = support_sup();
        if (cdf(lo) >= q) return lo;
        for (int it = 0; it < 80 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) >= q ? hi : lo) = mid;
        }
        return hi;
    }

    double renege(double q) const { return q <= 0.0 ? 0.0 : hazard_up_to(head_age(q)); }

private:
    double phi(size_t i) const {
        const double v = (*vals_)[i];
        if (v == 0.0) return 0.0;
        const double s = pat_->survival(dx0_ * double(i));
        if (s <= 0.0) throw NumericalError("eta0 charges ages beyond the patience support");
        return v / s;
    }

    double shifted_cdf(double xr) const {
        if (!vals_ || xr <= 0.0) return 0.0;
        const size_t n = vals_->size();
        const double hi = std::min(xr, dx0_ * double(n - 1));
        const size_t full = std::min(n - 1, size_t(hi / dx0_));
        double f = cum_mass_[full];
        const double left = dx0_ * double(full);
        if (hi > left && full + 1 < n) {
            const double u = (hi - left) / dx0_;
            const double a = (*vals_)[full] * ratio_[full];
            const double b = (*vals_)[full + 1] * ratio_[full + 1];
            f += 0.5 * (hi - left) * (a + (a + (b - a) * u));
        }
        return f;
    }

    double shifted_haz(double xr) const {
        if (!vals_ || xr <= 0.0) return 0.0;
        const size_t n = vals_->size();
        const double hi = std::min(xr, dx0_ * double(n - 1));
        const size_t full = std::min(n - 1, size_t(hi / dx0_));
        double f = cum_haz_[full];
        const double left = dx0_ * double(full);
        if (hi > left && full + 1 < n) {
            const double u = (hi - left) / dx0_;
            const double p0 = phi(full);
            const double pm = p0 + (phi(full + 1) - p0) * u;
            f += 0.5 * (p0 + pm) * (pat_->survival(left + t_) - pat_->survival(hi + t_));
        }
        return f;
    }

    const Distribution* pat_;
    double lambda_;
    double t_;
    double dx0_ = 0.0;
    const std::vector<double>* vals_ = nullptr;
    std::vector<double> cum_mass_, cum_haz_, ratio_;
};

struct Workspace {
    FluidConfig cfg;
    double dt = 0.0;
    int n = 0;
    double lambda = 0.0;
    std::vector<double> dG;                   // service CDF increments per cell
    std::vector<double> dIG;                  // ∫ G increments: dt - (IGbar increments)
    std::vector<double> theta_h, theta_mass;  // transported nu0 terms per grid time
    std::vector<double> X, B, Q, K, D, R, S, k, dep, ren, pot;
    std::span<const double> ren_path;         // optional externally imposed reneging rates

    explicit Workspace(const FluidConfig& c) : cfg(c) {
        dt = cfg.dt;
        n = int(std::llround(cfg.horizon / dt));
        if (n < 1) throw ConfigError("horizon must cover at least one step");
        lambda = cfg.lambda;
        dG.resize(size_t(n) + 1);
        dIG.resize(size_t(n) + 1);
        for (int m = 0; m <= n; ++m) {
            const double a = dt * double(m), b = a + dt;
            dG[size_t(m)] = cfg.service.cdf(b) - cfg.service.cdf(a);
            dIG[size_t(m)] =
                dt - (cfg.service.integrated_survival(b) - cfg.service.integrated_survival(a));
        }
        theta_h.assign(size_t(n) + 1, 0.0);
        theta_mass.assign(size_t(n) + 1, 0.0);
        if (cfg.nu0.mass() > 0.0) {
            if (!build_theta_fast()) {
                for (int j = 0; j <= n; ++j) {
                    const double tj = dt * double(j);
                    theta_h[size_t(j)] = shifted_hazard_term(cfg.nu0, cfg.service, tj);
                    theta_mass[size_t(j)] = shifted_mass_term(cfg.nu0, cfg.service, tj);
                }
            }
        }
        for (auto* v : {&X, &B, &Q, &K, &D, &R, &S, &k, &dep, &ren, &pot})
            v->assign(size_t(n) + 1, 0.0);
    }

    EtaView eta(double t) const { return EtaView(cfg.eta0, cfg.patience, lambda, t); }

    void set_initial_state() {
        X[0] = cfg.x0;
        B[0] = std::min(X[0], 1.0);
        Q[0] = X[0] - B[0];
        dep[0] = theta_h[0];
        if (ren_path.empty()) {
            const auto e0 = eta(0.0);
            ren[0] = e0.renege(Q[0]);
            pot[0] = e0.potential_rate();
        } else {
            ren[0] = ren_path[0];
        }
    }

    // Advances grid indices [from, n).  State at index `from` must be valid.
    // D accumulates by exact product integration of the entry-rate history against
    // the service CDF (the departure integrand has a square-root kink at age zero
    // for singular densities, which plain trapezoid stepping cannot absorb); the
    // entry rate solves the clamped balance dK = dB + dD by a short fixed-point
    // iteration whose contraction factor is G(dt).
    void run(int from) {
        for (int j = from; j < n; ++j) {
            double hist = theta_h[size_t(j) + 1];  // departure-rate history term
            double dconv = theta_terms_D(j + 1);   // D(t_{j+1}) minus the k_j window
            for (int i = 0; i < j; ++i) {
                hist += k[size_t(i)] * dG[size_t(j - i)];
                dconv += k[size_t(i)] * dIG[size_t(j - i)];
            }

            const bool ext = !ren_path.empty();
            std::optional<EtaView> ev;
            if (!ext) ev.emplace(cfg.eta0, cfg.patience, lambda, dt * double(j + 1));

            double kj = j > 0 ? k[size_t(j) - 1] : lambda;
            double renP = ren[j];
            double Xn = X[j], Bn = B[j], Qn = Q[j], dD = 0.0;
            for (int it = 0; it < 4; ++it) {
                dD = dconv + kj * dIG[0] - D[j];
                Xn = std::max(X[j] + dt * lambda - dD - 0.5 * dt * (ren[j] + renP), 0.0);
                Bn = std::min(Xn, 1.0);
                Qn = Xn - Bn;
                renP = ext ? ren_path[size_t(j) + 1] : ev->renege(Qn);
                kj = std::max(0.0, (Bn - B[j]) + dD) / dt;
            }
            dD = dconv + kj * dIG[0] - D[j];
            Xn = std::max(X[j] + dt * lambda - dD - 0.5 * dt * (ren[j] + renP), 0.0);

            X[j + 1] = Xn;
            B[j + 1] = std::min(Xn, 1.0);
            Q[j + 1] = Xn - B[j + 1];
            k[j] = std::max(0.0, (B[j + 1] - B[j]) + dD) / dt;
            K[j + 1] = K[j] + dt * k[j];
            D[j + 1] = D[j] + dD;
            dep[j + 1] = hist + k[j] * dG[0];
            ren[j + 1] = ext ? ren_path[size_t(j) + 1] : ev->renege(Q[j + 1]);
            pot[j + 1] = ext ? 0.0 : ev->potential_rate();
            R[j + 1] = R[j] + 0.5 * dt * (ren[j] + renP);
            S[j + 1] = S[j] + 0.5 * dt * (pot[j] + pot[j + 1]);

            if (!std::isfinite(X[j + 1]) || !std::isfinite(dep[j + 1]) ||
                !std::isfinite(ren[j + 1])) {
                std::ostringstream os;
                os << "fluid solve aborted: nonfinite state at t = " << dt * double(j + 1)
                   << " (X = " << X[j + 1] << ", dep = " << dep[j + 1]
                   << ", ren = " << ren[j + 1] << ")";
                throw NumericalError(os.str());
            }
        }
        k[n] = n > 0 ? k[n - 1] : lambda;
    }

    // cumulative departures out of the transported initial mass by time t_m
    double theta_terms_D(int m) const { return cfg.nu0.mass() - theta_mass[size_t(m)]; }

    // When nu0 is a plain density on the solver grid, x_i + t_j lands on grid
    // nodes, so the transported-mass and transported-hazard integrals become dot
    // products against extended survival/density tables.
    bool build_theta_fast() {
        const auto& m0 = cfg.nu0;
        if (m0.has_atoms() || m0.has_shifted() || !m0.has_density()) return false;
        if (std::abs(m0.grid_dx() - dt) > 1e-12 * dt) return false;
        const auto& v = m0.grid_values();
        const size_t nb = v.size();
        const size_t ext = nb + size_t(n) + 1;
        std::vector<double> gbar(ext), gden(ext);
        for (size_t m = 0; m < ext; ++m) {
            gbar[m] = cfg.service.survival(dt * double(m));
            gden[m] = cfg.service.density(dt * double(m));
        }
        // per-offset cell rule: trapezoid where it reproduces the CDF increment
        std::vector<char> smooth(ext, 1);
        for (size_t m = 0; m + 1 < ext; ++m) {
            const double dGc = gbar[m] - gbar[m + 1];
            const double trap = 0.5 * dt * (gden[m] + gden[m + 1]);
            smooth[m] = std::isfinite(gden[m]) && std::isfinite(gden[m + 1]) &&
                        std::abs(trap - dGc) <= 1e-4 * (std::abs(dGc) + 1e-300);
        }
        std::vector<double> phi(nb, 0.0), cmass(nb, 0.0);
        for (size_t i = 0; i < nb; ++i) {
            if (v[i] == 0.0) continue;
            const double s = cfg.service.survival(dt * double(i));
            if (s <= 0.0) throw NumericalError("nu0 charges ages beyond the service support");
            phi[i] = v[i] / s;
            cmass[i] = dt * phi[i] * ((i == 0 || i + 1 == nb) ? 0.5 : 1.0);
        }
        for (int j = 0; j <= n; ++j) {
            double tm = 0.0, th = 0.0;
            const size_t off = size_t(j);
            for (size_t i = 0; i < nb; ++i) tm += cmass[i] * gbar[i + off];
            for (size_t i = 0; i + 1 < nb; ++i) {
                if (v[i] == 0.0 && v[i + 1] == 0.0) continue;
                const size_t m = i + off;
                th += smooth[m] ? 0.5 * dt * (phi[i] * gden[m] + phi[i + 1] * gden[m + 1])
                                : 0.5 * (phi[i] + phi[i + 1]) * (gbar[m] - gbar[m + 1]);
            }
            theta_mass[size_t(j)] = tm;
            theta_h[size_t(j)] = th;
        }
        return true;
    }
};

FiniteMeasure nu_snapshot(const FluidConfig& cfg, std::span<const double> k, double dt, int n,
                          double time) {
    const int j = int(std::llround(time / dt));
    std::vector<double> f(size_t(std::max(j, 0)) + 1, 0.0);
    for (int i = 0; i <= j; ++i) {
        const int m = std::clamp(j - i, 0, std::max(n - 1, 0));
        f[size_t(i)] = cfg.service.survival(dt * double(i)) * k[size_t(m)];
    }
    if (cfg.nu0.mass() > 0.0) {
        auto sh = FiniteMeasure::shifted(cfg.nu0, time, cfg.service, "nu0");
        return j >= 1 ? sh.with_density(dt, std::move(f)) : sh;
    }
    if (j < 1) return FiniteMeasure();
    return FiniteMeasure::from_density(dt, std::move(f));
}

double quad_tolerance(double dt, double lambda) { return 50.0 * dt * dt * std::max(1.0, lambda); }

}  // namespace

void validate(const FluidConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (cfg.x0 < 0.0) throw ConfigError("x0 must be >= 0");
    if (std::abs(cfg.service.mean() - 1.0) > 1e-8)
        throw ConfigError("service law must be normalized to mean one");
    const double nmass = cfg.nu0.mass();
    if (nmass > 1.0 + 1e-8) throw ConfigError("nu0 mass exceeds one");
    const double gap = std::abs((1.0 - nmass) - std::max(1.0 - cfg.x0, 0.0));
    if (gap > 1e-8) {
        std::ostringstream os;
        os << "initial state violates 1 - <1,nu0> = (1 - x0)+ by " << gap;
        throw ConfigError(os.str());
    }
    if (cfg.eta0.has_atoms())
        throw ConfigError("eta0 must be a continuous measure (atoms are not admissible)");
    if (cfg.eta0.has_shifted())
        throw ConfigError("eta0 must be given as a plain gridded density");
    const double q0 = std::max(cfg.x0 - 1.0, 0.0);
    if (q0 > cfg.eta0.mass() + 1e-8)
        throw ConfigError("initial queue exceeds the potential-queue mass");
}

size_t FluidTrajectory::index_of(double time) const {
    const double r = time / dt;
    const long j = std::lround(r);
    if (j < 0 || j > n || std::abs(r - double(j)) > 1e-6)
        throw ConfigError("time is not on the trajectory grid");
    return size_t(j);
}

FiniteMeasure FluidTrajectory::nu_at(double time) const {
    index_of(time);
    return nu_snapshot(cfg, k, dt, n, time);
}

FiniteMeasure FluidTrajectory::eta_at_time(double time) const { return eta_at(cfg, time); }

double FluidTrajectory::nu_mass_from_history(double time) const {
    const size_t j = index_of(time);
    double m = theta_mass[j];
    for (size_t i = 0; i < j; ++i) {
        const double a = dt * double(j - i - 1), b = a + dt;
        m += k[i] * (cfg.service.integrated_survival(b) - cfg.service.integrated_survival(a));
    }
    return m;
}

namespace {
FluidTrajectory package(Workspace& w);
}

FluidTrajectory solve(const FluidConfig& cfg) {
    validate(cfg);
    Workspace w(cfg);
    w.set_initial_state();
    w.run(0);
    return package(w);
}

FluidTrajectory solve_with_renege_path(const FluidConfig& cfg, std::span<const double> renege) {
    if (!(cfg.lambda > 0.0) || !(cfg.dt > 0.0) || !(cfg.horizon > 0.0))
        throw ConfigError("lambda, dt and horizon must be positive");
    Workspace w(cfg);
    if (renege.size() < size_t(w.n) + 1)
        throw ConfigError("renege path must cover every grid point");
    w.ren_path = renege;
    w.set_initial_state();
    w.run(0);
    return package(w);
}

namespace {
FluidTrajectory package(Workspace& w) {
    const FluidConfig& cfg = w.cfg;
    FluidTrajectory out;
    out.cfg = cfg;
    out.dt = w.dt;
    out.n = w.n;
    out.t.resize(size_t(w.n) + 1);
    for (int j = 0; j <= w.n; ++j) out.t[size_t(j)] = w.dt * double(j);
    out.X = std::move(w.X);
    out.B = std::move(w.B);
    out.Q = std::move(w.Q);
    out.K = std::move(w.K);
    out.D = std::move(w.D);
    out.R = std::move(w.R);
    out.S = std::move(w.S);
    out.k = std::move(w.k);
    out.dep_rate = std::move(w.dep);
    out.renege_rate = std::move(w.ren);
    out.pot_rate = std::move(w.pot);
    out.theta_mass = std::move(w.theta_mass);
    out.theta_h = std::move(w.theta_h);
    out.quad_tol = quad_tolerance(w.dt, cfg.lambda);

    for (int j = 0; j <= out.n; ++j) {
        const bool want =
            (j == 0 || j == out.n || (cfg.snap_every > 0 && j % cfg.snap_every == 0));
        if (!want) continue;
        const double tj = out.t[size_t(j)];
        out.nu_snapshots.emplace_back(tj, out.nu_at(tj));
        if (w.ren_path.empty()) out.eta_snapshots.emplace_back(tj, eta_at(cfg, tj));
    }
    return out;
}
}  // namespace

FiniteMeasure eta_at(const FluidConfig& cfg, double t) {
    if (t < 0.0) throw ConfigError("eta_at needs t >= 0");
    if (t == 0.0) return cfg.eta0;
    const int nf = std::max(1, int(std::ceil(t / cfg.dt - 1e-9)));
    const double dxf = t / double(nf);
    std::vector<double> fresh(size_t(nf) + 1);
    for (int i = 0; i <= nf; ++i)
        fresh[size_t(i)] = cfg.lambda * cfg.patience.survival(dxf * double(i));
    if (cfg.eta0.mass() > 0.0)
        return FiniteMeasure::shifted(cfg.eta0, t, cfg.patience, "eta0")
            .with_density(dxf, std::move(fresh));
    return FiniteMeasure::from_density(dxf, std::move(fresh));
}

double nu_functional(const std::function<double(double)>& psi, const FiniteMeasure& nu0,
                     std::span<const double> k_history, double dt, double t,
                     const Distribution& service) {
    const long j = std::lround(t / dt);
    if (j < 0 || std::abs(t / dt - double(j)) > 1e-6)
        throw ConfigError("nu_functional needs t on the k-history grid");
    if (j > 0 && k_history.empty()) throw ConfigError("k history does not cover [0, t]");
    double total = 0.0;
    if (nu0.mass() > 0.0) {
        total += nu0.integrate([&](double x) {
            const double r = service.survival_ratio(x, t);
            return r > 0.0 ? r * psi(x + t) : 0.0;
        });
    }
    if (j > 0) {
        // trapezoid in s over [0, t] of psi(t-s) Gbar(t-s) k(s)
        auto term = [&](long i) {
            const double s = dt * double(i);
            const double age = t - s;
            const size_t ki = std::min(size_t(i), k_history.size() - 1);
            return psi(age) * service.survival(age) * k_history[ki];
        };
        double acc = 0.5 * (term(0) + term(j));
        for (long i = 1; i < j; ++i) acc += term(i);
        total += dt * acc;
    }
    return total;
}

double reneging_rate(double Q, const FiniteMeasure& eta_t, const Distribution& patience) {
    if (Q <= 0.0) return 0.0;
    if (Q > eta_t.mass() * (1.0 + 1e-9) + 1e-12)
        throw NumericalError("queue mass exceeds the potential-queue mass");
    const double abar = eta_t.inverse_cdf(std::min(Q, eta_t.mass()));
    return shifted_hazard_term_up_to(eta_t, patience, 0.0, abar);
}

ShiftReport time_shift_check(const FluidConfig& cfg, double t_cut) {
    validate(cfg);
    Workspace w(cfg);
    w.set_initial_state();
    w.run(0);

    const long j0 = std::lround(t_cut / w.dt);
    if (j0 < 0 || j0 > w.n || std::abs(t_cut / w.dt - double(j0)) > 1e-6)
        throw ConfigError("t_cut must be a grid point");

    // Restart from the state at t_cut: the k history before the cut is the state's
    // internal representation of nu_{t_cut}, so the tail is re-derived, not copied.
    Workspace w2(cfg);
    w2.set_initial_state();
    for (long j = 0; j <= j0; ++j) {
        w2.X[j] = w.X[j];
        w2.B[j] = w.B[j];
        w2.Q[j] = w.Q[j];
        w2.K[j] = w.K[j];
        w2.D[j] = w.D[j];
        w2.R[j] = w.R[j];
        w2.S[j] = w.S[j];
        w2.dep[j] = w.dep[j];
        w2.ren[j] = w.ren[j];
        w2.pot[j] = w.pot[j];
        if (j < j0) w2.k[j] = w.k[j];
    }
    w2.run(int(j0));

    double dev = 0.0;
    for (long j = j0; j <= w.n; ++j) {
        dev = std::max(dev, std::abs(w.X[j] - w2.X[j]));
        dev = std::max(dev, std::abs(w.B[j] - w2.B[j]));
        dev = std::max(dev, std::abs(w.Q[j] - w2.Q[j]));
        dev = std::max(dev, std::abs(w.dep[j] - w2.dep[j]));
        dev = std::max(dev, std::abs(w.ren[j] - w2.ren[j]));
        if (j < w.n) dev = std::max(dev, std::abs(w.k[j] - w2.k[j]));
    }
    ShiftReport rep;
    rep.t_cut = t_cut;
    rep.max_deviation = dev;
    rep.tolerance = 5.0 * quad_tolerance(w.dt, cfg.lambda);
    rep.pass = dev <= rep.tolerance;
    return rep;
}

}  // namespace fluidq
