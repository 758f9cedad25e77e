#include "fluidq/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fluidq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Volterra collocation: solve y = rhs + y * g with y piecewise linear and the
// kernel integrated exactly per cell.  Cell weights for τ in [t_m, t_{m+1}]:
//   A_m = G(t_{m+1}) - G(t_m)                      (plain CDF increment)
//   Q_m = (m+1) A_m - M_m / dt,  M_m = ∫ τ g(τ) dτ (first-moment increment)
// giving contribution y_j (A_m - Q_m) + y_{j+1} Q_m with m = n-1-j.
std::vector<double> volterra_solve(const Distribution& d, double dt, int n,
                                   const std::vector<double>& rhs, double y0,
                                   double divergence_cap) {
    const size_t N = size_t(n);
    std::vector<double> A(N), Qw(N);
    for (int m = 0; m < n; ++m) {
        const double a = dt * double(m), b = a + dt;
        const double Ga = d.cdf(a), Gb = d.cdf(b);
        A[size_t(m)] = Gb - Ga;
        const double M = b * Gb - a * Ga - dt + (d.integrated_survival(b) - d.integrated_survival(a));
        Qw[size_t(m)] = double(m + 1) * A[size_t(m)] - M / dt;
    }
    std::vector<double> y(size_t(n) + 1);
    y[0] = y0;
    for (int nn = 1; nn <= n; ++nn) {
        double acc = rhs[size_t(nn)];
        for (int j = 0; j < nn; ++j) {
            const size_t m = size_t(nn - 1 - j);
            acc += y[size_t(j)] * (A[m] - Qw[m]);
            if (j + 1 < nn) acc += y[size_t(j) + 1] * Qw[m];
        }
        y[size_t(nn)] = acc / (1.0 - Qw[0]);
        if (!std::isfinite(y[size_t(nn)]) || y[size_t(nn)] > divergence_cap)
            throw NumericalError("renewal recursion diverged");
    }
    return y;
}

}  // namespace

RenewalTable renewal_density(const Distribution& service, double dt, double horizon) {
    if (!(dt > 0.0)) throw ConfigError("renewal grid dt must be positive");
    const int n = int(std::llround(horizon / dt));
    if (n < 1) throw ConfigError("renewal horizon must cover at least one step");

    RenewalTable table;
    table.source = service;
    table.dt = dt;
    const double g0 = service.density(0.0);
    table.singular = !std::isfinite(g0);

    // Richardson step: collocation error is O(h^2), so combining the dt and dt/2
    // solves cancels the leading term.
    auto refined = [&](const auto& rhs_fn, double y0, double cap) {
        std::vector<double> rhs1(size_t(n) + 1), rhs2(size_t(2 * n) + 1);
        for (int j = 0; j <= n; ++j) rhs1[size_t(j)] = rhs_fn(dt * double(j));
        for (int j = 0; j <= 2 * n; ++j) rhs2[size_t(j)] = rhs_fn(dt / 2.0 * double(j));
        auto y1 = volterra_solve(service, dt, n, rhs1, y0, cap);
        auto y2 = volterra_solve(service, dt / 2.0, 2 * n, rhs2, y0, cap);
        std::vector<double> out(size_t(n) + 1);
        for (int j = 0; j <= n; ++j)
            out[size_t(j)] = (4.0 * y2[size_t(2 * j)] - y1[size_t(j)]) / 3.0;
        out[0] = y0;
        return out;
    };

    if (!table.singular) {
        const double cap = 10.0 * (1.0 + g0) * std::exp(horizon);
        table.u = refined([&](double x) { return service.density(x); }, g0, cap);
        table.U.assign(size_t(n) + 1, 0.0);
        for (int j = 0; j < n; ++j)
            table.U[size_t(j) + 1] =
                table.U[size_t(j)] + 0.5 * dt * (table.u[size_t(j)] + table.u[size_t(j) + 1]);
    } else {
        const double cap = 10.0 * (1.0 + horizon) * std::exp(horizon);
        table.U = refined([&](double x) { return service.cdf(x); }, 0.0, cap);
        table.u.assign(size_t(n) + 1, 0.0);
        table.u[0] = kInf;
        for (int j = 1; j < n; ++j)
            table.u[size_t(j)] = (table.U[size_t(j) + 1] - table.U[size_t(j) - 1]) / (2.0 * dt);
        table.u[size_t(n)] = (table.U[size_t(n)] - table.U[size_t(n) - 1]) / dt;
    }
    return table;
}

ConcavityReport concavity_check(const RenewalTable& table, double slack) {
    ConcavityReport rep;
    rep.hazard_decreasing = classify_hazard(table.source).is_decreasing;
    rep.nonincreasing = true;
    double prev = kInf;
    for (size_t i = 0; i < table.u.size(); ++i) {
        const double ui = table.u[i];
        if (!std::isfinite(ui)) continue;
        if (ui > prev + slack) {
            rep.nonincreasing = false;
            rep.first_violation_t = table.dt * double(i);
            rep.first_violation_jump = ui - prev;
            break;
        }
        prev = ui;
    }
    return rep;
}

std::vector<double> lambda_sequence(double lambda, double eps, double g0, int count) {
    std::vector<double> out;
    const double base = 1.0 - 1.0 / g0;
    double pw = 1.0;
    for (int i = 0; i < count; ++i) {
        pw *= base;
        out.push_back((lambda - eps) * (1.0 - pw));
    }
    return out;
}

WZTrace wz_trace(const FluidTrajectory& traj, const RenewalTable& table, double lambda,
                 double eps) {
    if (!(eps > 0.0) || !(eps < 0.5)) throw ConfigError("eps must lie in (0, 1/2)");
    if (std::abs(table.dt - traj.dt) > 1e-12)
        throw ConfigError("renewal table and trajectory must share the grid step");
    if (!table.source.same_law(traj.cfg.service))
        throw ConfigError("renewal table was built for a different service law");
    const size_t n1 = traj.t.size();
    if (table.u.size() < n1) throw ConfigError("renewal table horizon is too short");

    WZTrace tr;
    tr.dt = traj.dt;
    tr.t = traj.t;
    tr.g0 = table.source.density(0.0);

    const auto reg = classify_hazard(table.source);
    if (tr.g0 == 0.0 && reg.is_decreasing)
        throw ConfigError("g(0) = 0 contradicts a decreasing hazard");

    tr.W.resize(n1);
    for (size_t j = 0; j < n1; ++j) tr.W[j] = traj.B[j] - traj.theta_mass[j];

    tr.Z.assign(n1, 0.0);
    if (!table.singular) {
        for (size_t j = 1; j < n1; ++j) {
            double acc = 0.5 * (tr.W[j] * table.u[0] + tr.W[0] * table.u[j]);
            for (size_t m = 1; m < j; ++m) acc += tr.W[j - m] * table.u[m];
            tr.Z[j] = traj.dt * acc;
        }
    } else {
        // Stieltjes against dU with W at cell midpoints
        for (size_t j = 1; j < n1; ++j) {
            double acc = 0.0;
            for (size_t m = 0; m < j; ++m)
                acc += 0.5 * (tr.W[j - m] + tr.W[j - m - 1]) * (table.U[m + 1] - table.U[m]);
            tr.Z[j] = acc;
        }
    }

    if (std::isfinite(tr.g0) && tr.g0 > 0.0) {
        // thresholds are meaningful while lambda_n < 1; keep a couple beyond n*
        std::vector<double> full = lambda_sequence(lambda, eps, tr.g0, 64);
        int nstar = -1;
        for (int i = 0; i < int(full.size()); ++i)
            if (full[size_t(i)] < 1.0) nstar = i;
        if (nstar == int(full.size()) - 1) {
            tr.n_star = std::nullopt;  // whole (capped) sequence below one
        } else {
            tr.n_star = nstar;
        }
        const int keep = tr.n_star ? std::min<int>(*tr.n_star + 2, int(full.size())) : int(full.size());
        tr.lambda_n.assign(full.begin(), full.begin() + keep);
        for (double ln : tr.lambda_n) {
            TauEstimate te;
            te.lambda_n = ln;
            long last_below = -1;
            for (size_t j = 0; j < n1; ++j)
                if (tr.W[j] < ln) last_below = long(j);
            if (last_below < 0) {
                te.t_hat = 0.0;
                te.observed = true;
            } else if (size_t(last_below) == n1 - 1) {
                te.t_hat = traj.t.back();
                te.observed = false;
            } else {
                te.t_hat = traj.t[size_t(last_below) + 1];
                te.observed = true;
            }
            tr.tau_n.push_back(te);
        }
    } else {
        tr.n_star = std::nullopt;
    }
    return tr;
}

std::vector<double> q_ode_oracle(double lambda, const Distribution& patience, double q0,
                                 double dt, double horizon) {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    const int n = int(std::llround(horizon / dt));
    const double eta_mass = lambda * patience.mean();
    const double a_hi = [&] {
        if (std::isfinite(patience.support_end())) return patience.support_end();
        double hi = 1.0;
        while (patience.mean() - patience.integrated_survival(hi) > 1e-14 && hi < 1e9) hi *= 2.0;
        return hi;
    }();
    auto head = [&](double q) {
        if (q <= 0.0) return 0.0;
        if (q >= eta_mass) return a_hi;
        double lo = 0.0, hi = a_hi;
        for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (lambda * patience.integrated_survival(mid) >= q ? hi : lo) = mid;
        }
        return hi;
    };
    std::vector<double> out(size_t(n) + 1);
    out[0] = q0;
    const int sub = 10;  // explicit Euler on refined substeps
    const double h = dt / double(sub);
    double q = q0;
    for (int j = 0; j < n; ++j) {
        for (int s = 0; s < sub; ++s) {
            q += h * (lambda * patience.survival(head(q)) - 1.0);
            q = std::max(q, 0.0);
        }
        out[size_t(j) + 1] = q;
    }
    return out;
}

}  // namespace fluidq
