#include "fluidq/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fluidq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// max of |x log x| over [0, m]
double xlogx_sup(double m) {
    if (m <= 0.0) return 0.0;
    double s = m >= std::exp(-1.0) ? std::exp(-1.0) : -xlogx(m);
    if (m > 1.0) s = std::max(s, xlogx(m));
    return s;
}

struct GridPair {
    double dx;
    std::vector<double> p, q;  // padded to a common length
};

GridPair align(const FiniteMeasure& P, const FiniteMeasure& Q) {
    if (!P.has_density() || !Q.has_density())
        throw ConfigError("rel_entropy needs gridded densities on both sides");
    if (P.has_shifted() || Q.has_shifted())
        throw ConfigError("rel_entropy needs plain gridded densities");
    const double dx = Q.grid_dx();
    if (std::abs(P.grid_dx() - dx) > 1e-12 * dx)
        throw ConfigError("rel_entropy needs a common grid resolution");
    GridPair g;
    g.dx = dx;
    g.p = P.grid_values();
    g.q = Q.grid_values();
    const size_t n = std::max(g.p.size(), g.q.size());
    g.p.resize(n, 0.0);
    g.q.resize(n, 0.0);
    return g;
}

}  // namespace

double rel_entropy(const FiniteMeasure& P, const FiniteMeasure& Q) {
    if (std::abs(Q.mass() - 1.0) > 1e-6)
        throw ConfigError("rel_entropy reference must be a probability measure");
    if (P.has_atoms()) return kInf;  // atoms cannot be absolutely continuous w.r.t. Q
    if (!P.has_density()) return 0.0;
    auto g = align(P, Q);
    double acc = 0.0;
    const size_t n = g.p.size();
    for (size_t i = 0; i < n; ++i) {
        double w = 0.0;
        if (g.p[i] > 0.0) {
            if (g.q[i] <= 0.0) return kInf;
            w = g.p[i] * std::log(g.p[i] / g.q[i]);
        }
        acc += (i == 0 || i + 1 == n) ? 0.5 * w : w;
    }
    return acc * g.dx;
}

double pinsker_bound(const FiniteMeasure& P, const FiniteMeasure& Q) {
    const double c = P.mass();
    if (!(c > 0.0)) throw ConfigError("pinsker_bound needs <1, P> > 0");
    const double r = rel_entropy(P, Q);
    if (!std::isfinite(r)) return kInf;
    return std::abs(c - 1.0) + std::sqrt(2.0 * std::abs(r) / c + 2.0 * std::abs(std::log(c)));
}

double entropy_estimate_gap(double dx, std::span<const double> f, const Distribution& service) {
    const auto reg = classify_hazard(service);
    if (!reg.is_bounded_away)
        throw ConfigError("entropy estimate needs a hazard bounded away from 0 and infinity");
    double total = 0.0, z = 0.0, rel = 0.0, hlog = 0.0;
    const size_t n = f.size();
    for (size_t i = 0; i < n; ++i) {
        const double x = dx * double(i);
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        total += w * f[i];
        if (f[i] > 0.0) {
            const double h = service.hazard(x);
            const double lr = std::log(f[i] / service.survival(x));
            z += w * h * f[i];
            rel += w * f[i] * lr;
            hlog += w * h * f[i] * lr;
        }
    }
    total *= dx;
    z *= dx;
    rel *= dx;
    hlog *= dx;
    if (total > 1.0 + 1e-4) throw ConfigError("entropy estimate needs integral f <= 1");
    return (hlog - xlogx(z)) - reg.eps_h * rel;
}

double xlogx_modulus(double delta, double c_h) {
    if (delta <= 0.0) return 0.0;
    const double e1 = std::exp(-1.0);
    const double left = delta <= e1 ? -xlogx(delta) : e1;
    const double lip = std::max(0.0, 1.0 + std::log(std::max(c_h, e1)));
    return std::max(left, delta * lip);
}

EntropyTrace entropy_trace(const FluidTrajectory& traj) {
    const auto& cfg = traj.cfg;
    const auto reg = classify_hazard(cfg.service);

    EntropyTrace tr;
    tr.dt = traj.dt;
    tr.eps_h = reg.eps_h;
    tr.c_h = reg.c_h;
    tr.upsilon_defined = reg.is_bounded_away;
    tr.t = traj.t;
    tr.B = traj.B;
    tr.theta_mass = traj.theta_mass;
    tr.theta_h = traj.theta_h;

    const size_t n1 = traj.t.size();
    const int n = traj.n;
    tr.mu_mass.resize(n1);
    for (size_t j = 0; j < n1; ++j) tr.mu_mass[j] = traj.B[j] - traj.theta_mass[j];

    // r_t = ∫_0^t Gbar(t-x) k_x log k_x dx, trapezoid over the stored history
    std::vector<double> gbar(n1), kl(n1);
    for (size_t m = 0; m < n1; ++m) gbar[m] = cfg.service.survival(traj.dt * double(m));
    for (size_t i = 0; i < n1; ++i) kl[i] = xlogx(traj.k[std::min(i, size_t(std::max(n - 1, 0)))]);
    tr.r.assign(n1, 0.0);
    for (size_t j = 1; j < n1; ++j) {
        double acc = 0.5 * (gbar[j] * kl[0] + gbar[0] * kl[j]);
        for (size_t i = 1; i < j; ++i) acc += gbar[j - i] * kl[i];
        tr.r[j] = traj.dt * acc;
    }

    tr.upsilon.assign(n1, std::numeric_limits<double>::quiet_NaN());
    if (tr.upsilon_defined)
        for (size_t j = 0; j < n1; ++j) tr.upsilon[j] = xlogx_modulus(tr.theta_h[j], tr.c_h);

    auto busy_time = [&](double eps) {
        std::vector<double> L(n1, 0.0);
        for (size_t j = 0; j + 1 < n1; ++j)
            L[j + 1] = L[j] + (traj.B[j] >= 1.0 - eps ? traj.dt : 0.0);
        return L;
    };
    tr.L = busy_time(tr.busy_eps);
    tr.L_end_loose = busy_time(1e-8).back();
    tr.L_end_tight = busy_time(1e-10).back();

    // d_TV(mu_t, nu*) = ∫_0^t Gbar |k_{t-x} - 1| dx + ∫_t^inf Gbar
    tr.tv_actual.assign(n1, 0.0);
    for (size_t j = 0; j < n1; ++j) {
        double acc = 0.0;
        if (j >= 1) {
            acc = 0.5 * (gbar[0] * std::abs(traj.k[std::min(j, size_t(std::max(n - 1, 0)))] - 1.0) +
                         gbar[j] * std::abs(traj.k[0] - 1.0));
            for (size_t i = 1; i < j; ++i) acc += gbar[j - i] * std::abs(traj.k[i] - 1.0);
        }
        tr.tv_actual[j] =
            traj.dt * acc + (1.0 - cfg.service.integrated_survival(traj.dt * double(j)));
    }

    tr.tv_bound.assign(n1, kInf);
    for (size_t j = 0; j < n1; ++j) {
        const double c = tr.mu_mass[j];
        if (c > 1e-12 && std::isfinite(tr.r[j])) {
            tr.tv_bound[j] = std::abs(c - 1.0) +
                             std::sqrt(2.0 * std::abs(tr.r[j]) / c + 2.0 * std::abs(std::log(c)));
        }
    }

    tr.r_running_sup.assign(n1, 0.0);
    double sup = 0.0;
    for (size_t j = 0; j < n1; ++j) {
        sup = std::max(sup, std::abs(tr.r[j]));
        tr.r_running_sup[j] = sup;
    }
    tr.c_r = sup;

    double kmax = cfg.lambda;
    for (double kk : traj.k) kmax = std::max(kmax, kk);
    if (std::isfinite(reg.c_h)) kmax = std::max(kmax, reg.c_h);
    tr.c_lip = 2.0 * xlogx_sup(kmax);
    return tr;
}

double rel_entropy_from_density(const FluidTrajectory& traj, double time) {
    traj.index_of(time);
    auto nu = traj.nu_at(time);
    if (!nu.has_density()) return 0.0;
    const auto& f = nu.grid_values();
    double acc = 0.0;
    const size_t n = f.size();
    for (size_t i = 0; i < n; ++i) {
        double w = 0.0;
        if (f[i] > 0.0) {
            const double fs = traj.cfg.service.survival(traj.dt * double(i));
            w = f[i] * std::log(f[i] / fs);
        }
        acc += (i == 0 || i + 1 == n) ? 0.5 * w : w;
    }
    return acc * traj.dt;
}

EnvelopeReport envelope_check(const EntropyTrace& trace, double s, double t, double slack) {
    if (!trace.upsilon_defined)
        throw ConfigError("envelope check needs a bounded-away hazard (Upsilon undefined)");
    EnvelopeReport rep;
    rep.s = s;
    rep.t = t;
    const size_t js = size_t(std::lround(s / trace.dt));
    const size_t jt = size_t(std::lround(t / trace.dt));
    if (jt >= trace.t.size() || js >= jt) throw ConfigError("envelope check needs grid s < t");
    if (trace.B[jt] < 1.0 - trace.busy_eps)
        throw ConfigError("envelope check needs t in the busy set");
    double ups = 0.0;
    for (size_t i = js; i < jt; ++i) ups += 0.5 * trace.dt * (trace.upsilon[i] + trace.upsilon[i + 1]);
    rep.lhs = trace.r[jt];
    rep.rhs = trace.r_running_sup[jt] * std::exp(-trace.eps_h * (trace.L[jt] - trace.L[js])) +
              ups + slack;
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin >= 0.0;
    return rep;
}

ThetaDecayReport theta_decay_check(const EntropyTrace& trace, double slack) {
    if (!trace.upsilon_defined)
        throw ConfigError("theta decay check needs a bounded-away hazard");
    ThetaDecayReport rep;
    rep.min_margin = kInf;
    for (size_t j = 0; j < trace.t.size(); ++j) {
        const double bound = trace.c_h * std::exp(-trace.eps_h * trace.t[j]) + slack;
        rep.min_margin = std::min(rep.min_margin, bound - trace.theta_h[j]);
    }
    rep.pass = rep.min_margin >= 0.0;
    return rep;
}

}  // namespace fluidq
