#include "fluidq/multiclass.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fluidq {

void validate(const MulticlassConfig& cfg) {
    if (cfg.J < 1) throw ConfigError("J must be >= 1");
    const size_t J = size_t(cfg.J);
    if (cfg.lambda.size() != J || cfg.theta.size() != J)
        throw ConfigError("lambda and theta must have J entries");
    for (double l : cfg.lambda)
        if (!(l > 0.0)) throw ConfigError("class arrival rates must be positive");
    for (double th : cfg.theta)
        if (!(th > 0.0)) throw ConfigError("class reneging rates must be positive");
    if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) throw ConfigError("dt and horizon must be positive");
    if (std::abs(cfg.service.mean() - 1.0) > 1e-8)
        throw ConfigError("service law must be normalized to mean one");
    if (!cfg.x0.empty() && cfg.x0.size() != J) throw ConfigError("x0 must have J entries");
    if (!cfg.nu0.empty() && cfg.nu0.size() != J) throw ConfigError("nu0 must have J entries");
    double xt = 0.0, nt = 0.0;
    for (size_t i = 0; i < J; ++i) {
        if (!cfg.x0.empty()) {
            if (cfg.x0[i] < 0.0) throw ConfigError("x0 entries must be >= 0");
            xt += cfg.x0[i];
        }
        if (!cfg.nu0.empty()) nt += cfg.nu0[i].mass();
    }
    if (std::abs((1.0 - nt) - std::max(1.0 - xt, 0.0)) > 1e-8) {
        std::ostringstream os;
        os << "aggregate initial state violates 1 - <1,nu~> = (1 - X~)+ (nu mass " << nt
           << ", X " << xt << ")";
        throw ConfigError(os.str());
    }
}

size_t MulticlassTrajectory::index_of(double time) const {
    const double r = time / dt;
    const long j = std::lround(r);
    if (j < 0 || j > n || std::abs(r - double(j)) > 1e-6)
        throw ConfigError("time is not on the trajectory grid");
    return size_t(j);
}

std::vector<double> MulticlassTrajectory::aggregate(
    const std::vector<std::vector<double>>& per_class) const {
    std::vector<double> out(size_t(n) + 1, 0.0);
    for (const auto& v : per_class)
        for (size_t j = 0; j < out.size(); ++j) out[j] += v[j];
    return out;
}

FiniteMeasure MulticlassTrajectory::nu_at(int cls, double time) const {
    const size_t j = index_of(time);
    const auto& kk = k[size_t(cls)];
    std::vector<double> f(j + 1, 0.0);
    for (size_t i = 0; i <= j; ++i) {
        const size_t m = std::min(j - i, size_t(std::max(n - 1, 0)));
        f[i] = cfg.service.survival(dt * double(i)) * kk[m];
    }
    const bool has_nu0 = !cfg.nu0.empty() && cfg.nu0[size_t(cls)].mass() > 0.0;
    if (has_nu0) {
        auto sh = FiniteMeasure::shifted(cfg.nu0[size_t(cls)], time, cfg.service, "nu0");
        return j >= 1 ? sh.with_density(dt, std::move(f)) : sh;
    }
    if (j < 1) return FiniteMeasure();
    return FiniteMeasure::from_density(dt, std::move(f));
}

std::pair<std::vector<double>, std::vector<double>> rho_q(std::span<const double> lambda,
                                                          std::span<const double> theta) {
    if (lambda.size() != theta.size() || lambda.empty())
        throw ConfigError("rho_q needs matching nonempty rate vectors");
    std::vector<double> rho(lambda.size()), q(lambda.size());
    double cum = 0.0;
    for (size_t i = 0; i < lambda.size(); ++i) {
        const double next = cum + lambda[i];
        rho[i] = std::min(next, 1.0) - std::min(cum, 1.0);
        q[i] = (lambda[i] - rho[i]) / theta[i];
        cum = next;
    }
    return {rho, q};
}

MulticlassTrajectory solve_multiclass(const MulticlassConfig& cfg) {
    validate(cfg);
    const size_t J = size_t(cfg.J);
    const double dt = cfg.dt;
    const int n = int(std::llround(cfg.horizon / dt));
    if (n < 1) throw ConfigError("horizon must cover at least one step");

    std::vector<double> dG(size_t(n) + 1), dIG(size_t(n) + 1);
    for (int m = 0; m <= n; ++m) {
        const double a = dt * double(m), b = a + dt;
        dG[size_t(m)] = cfg.service.cdf(b) - cfg.service.cdf(a);
        dIG[size_t(m)] =
            dt - (cfg.service.integrated_survival(b) - cfg.service.integrated_survival(a));
    }

    MulticlassTrajectory tr;
    tr.cfg = cfg;
    tr.dt = dt;
    tr.n = n;
    tr.t.resize(size_t(n) + 1);
    for (int j = 0; j <= n; ++j) tr.t[size_t(j)] = dt * double(j);
    auto zeros = std::vector<std::vector<double>>(J, std::vector<double>(size_t(n) + 1, 0.0));
    tr.X = zeros;
    tr.B = zeros;
    tr.Q = zeros;
    tr.K = zeros;
    tr.D = zeros;
    tr.R = zeros;
    tr.k = zeros;
    tr.dep_rate = zeros;
    tr.theta_mass = zeros;
    std::tie(tr.rho, tr.q) = rho_q(cfg.lambda, cfg.theta);

    std::vector<std::vector<double>> theta_h(J, std::vector<double>(size_t(n) + 1, 0.0));
    for (size_t i = 0; i < J; ++i) {
        if (cfg.nu0.empty() || cfg.nu0[i].mass() <= 0.0) continue;
        for (int j = 0; j <= n; ++j) {
            const double tj = dt * double(j);
            theta_h[i][size_t(j)] = shifted_hazard_term(cfg.nu0[i], cfg.service, tj);
            tr.theta_mass[i][size_t(j)] = shifted_mass_term(cfg.nu0[i], cfg.service, tj);
        }
    }

    for (size_t i = 0; i < J; ++i) {
        tr.X[i][0] = cfg.x0.empty() ? 0.0 : cfg.x0[i];
        tr.B[i][0] = cfg.nu0.empty() ? std::min(tr.X[i][0], 1.0) : cfg.nu0[i].mass();
        tr.Q[i][0] = tr.X[i][0] - tr.B[i][0];
        tr.dep_rate[i][0] = theta_h[i][0];
    }

    // nonpreemptive priority allocation of the aggregate entry rate: classes are
    // scanned in priority order; an empty class passes through at most lambda_i,
    // the first queued class absorbs the rest (capped so its queue cannot go
    // negative within the step), and lower classes get nothing.
    auto allocate = [&](double ktilde, const std::vector<double>& queue,
                        std::vector<double>& out) {
        double remaining = ktilde;
        for (size_t i = 0; i < J; ++i) {
            const double cap =
                std::max(0.0, cfg.lambda[i] - cfg.theta[i] * queue[i] + queue[i] / dt);
            out[i] = std::min(remaining, cap);
            remaining -= out[i];
            if (queue[i] > 1e-9) {
                for (size_t l = i + 1; l < J; ++l) out[l] = 0.0;
                return;
            }
        }
    };

    // Mirrors the single-class stepper: per-class departures accumulate by exact
    // product integration of the entry-rate history against the service CDF, and
    // the aggregate entry rate solves the clamped balance by fixed-point iteration.
    std::vector<double> hist(J), dconv(J), kfin(J), renP(J), ren0(J), queue0(J), dD(J), Xn(J);
    for (int j = 0; j < n; ++j) {
        double Bt = 0.0;
        for (size_t i = 0; i < J; ++i) {
            const double nu0_mass = cfg.nu0.empty() ? 0.0 : cfg.nu0[i].mass();
            hist[i] = theta_h[i][size_t(j) + 1];
            dconv[i] = nu0_mass - tr.theta_mass[i][size_t(j) + 1];
            for (int m = 0; m < j; ++m) {
                hist[i] += tr.k[i][size_t(m)] * dG[size_t(j - m)];
                dconv[i] += tr.k[i][size_t(m)] * dIG[size_t(j - m)];
            }
            Bt += tr.B[i][size_t(j)];
            queue0[i] = tr.Q[i][size_t(j)];
            ren0[i] = cfg.theta[i] * std::max(queue0[i], 0.0);
            renP[i] = ren0[i];
            kfin[i] = j > 0 ? tr.k[i][size_t(j) - 1] : cfg.lambda[i];
        }

        for (int it = 0; it < 4; ++it) {
            double Xt1 = 0.0, dDsum = 0.0;
            for (size_t i = 0; i < J; ++i) {
                dD[i] = dconv[i] + kfin[i] * dIG[0] - tr.D[i][size_t(j)];
                Xn[i] = std::max(tr.X[i][size_t(j)] + dt * cfg.lambda[i] - dD[i] -
                                     0.5 * dt * (ren0[i] + renP[i]),
                                 0.0);
                Xt1 += Xn[i];
                dDsum += dD[i];
            }
            const double kt = std::max(0.0, (std::min(Xt1, 1.0) - Bt) + dDsum) / dt;
            allocate(kt, queue0, kfin);
            for (size_t i = 0; i < J; ++i) {
                const double Bc = tr.B[i][size_t(j)] + dt * kfin[i] - dD[i];
                renP[i] = cfg.theta[i] * std::max(Xn[i] - Bc, 0.0);
            }
        }

        for (size_t i = 0; i < J; ++i) {
            dD[i] = dconv[i] + kfin[i] * dIG[0] - tr.D[i][size_t(j)];
            tr.X[i][size_t(j) + 1] = std::max(tr.X[i][size_t(j)] + dt * cfg.lambda[i] - dD[i] -
                                                  0.5 * dt * (ren0[i] + renP[i]),
                                              0.0);
            tr.k[i][size_t(j)] = kfin[i];
            tr.K[i][size_t(j) + 1] = tr.K[i][size_t(j)] + dt * kfin[i];
            tr.D[i][size_t(j) + 1] = tr.D[i][size_t(j)] + dD[i];
            tr.B[i][size_t(j) + 1] = tr.B[i][size_t(j)] + dt * kfin[i] - dD[i];
            tr.Q[i][size_t(j) + 1] = tr.X[i][size_t(j) + 1] - tr.B[i][size_t(j) + 1];
            tr.R[i][size_t(j) + 1] = tr.R[i][size_t(j)] + 0.5 * dt * (ren0[i] + renP[i]);
            tr.dep_rate[i][size_t(j) + 1] = hist[i] + kfin[i] * dG[0];
            if (!std::isfinite(tr.X[i][size_t(j) + 1]) ||
                !std::isfinite(tr.dep_rate[i][size_t(j) + 1])) {
                std::ostringstream os;
                os << "multiclass solve aborted: nonfinite state for class " << (i + 1)
                   << " at t = " << dt * double(j + 1);
                throw NumericalError(os.str());
            }
        }
    }
    for (size_t i = 0; i < J; ++i) tr.k[i][size_t(n)] = tr.k[i][size_t(n) - 1];
    tr.quad_tol = 50.0 * dt * dt * std::max(1.0, tr.aggregate(tr.X)[0] +
                                                     std::accumulate(cfg.lambda.begin(),
                                                                     cfg.lambda.end(), 0.0));
    return tr;
}

AggregateReport aggregate_consistency(const MulticlassTrajectory& traj) {
    const auto& cfg = traj.cfg;
    const size_t J = size_t(cfg.J);
    const size_t n1 = traj.t.size();

    // realized aggregate reneging path
    std::vector<double> ren(n1, 0.0);
    for (size_t i = 0; i < J; ++i)
        for (size_t j = 0; j < n1; ++j)
            ren[j] += cfg.theta[i] * std::max(traj.Q[i][j], 0.0);

    double lam_t = 0.0, x0_t = 0.0;
    for (size_t i = 0; i < J; ++i) lam_t += cfg.lambda[i];
    for (size_t i = 0; i < J && !cfg.x0.empty(); ++i) x0_t += cfg.x0[i];

    // merge the per-class initial measures onto a common grid
    FluidConfig agg{lam_t, cfg.service, Distribution::exponential(1.0), x0_t,
                    FiniteMeasure(), FiniteMeasure(), cfg.dt, cfg.horizon};
    if (!cfg.nu0.empty()) {
        double mass = 0.0;
        for (const auto& m : cfg.nu0) mass += m.mass();
        if (mass > 0.0) {
            size_t len = 0;
            for (const auto& m : cfg.nu0) {
                if (m.has_shifted() || m.has_atoms())
                    throw ConfigError("aggregate check needs plain gridded nu0 parts");
                if (m.has_density()) {
                    if (std::abs(m.grid_dx() - cfg.dt) > 1e-12)
                        throw ConfigError("aggregate check needs nu0 on the solver grid");
                    len = std::max(len, m.grid_values().size());
                }
            }
            std::vector<double> v(len, 0.0);
            for (const auto& m : cfg.nu0)
                for (size_t idx = 0; m.has_density() && idx < m.grid_values().size(); ++idx)
                    v[idx] += m.grid_values()[idx];
            agg.nu0 = FiniteMeasure::from_density(cfg.dt, std::move(v));
        }
    }
    auto single = solve_with_renege_path(agg, ren);

    AggregateReport rep;
    auto Xa = traj.aggregate(traj.X);
    auto Ba = traj.aggregate(traj.B);
    auto Ka = traj.aggregate(traj.K);
    auto Da = traj.aggregate(traj.dep_rate);
    auto Qa = traj.aggregate(traj.Q);
    for (size_t j = 0; j < n1; ++j) {
        rep.max_dev_X = std::max(rep.max_dev_X, std::abs(Xa[j] - single.X[j]));
        rep.max_dev_B = std::max(rep.max_dev_B, std::abs(Ba[j] - single.B[j]));
        rep.max_dev_K = std::max(rep.max_dev_K, std::abs(Ka[j] - single.K[j]));
    }
    // aggregate entry-rate rule off the switching set
    for (size_t j = 0; j + 1 < n1; ++j) {
        double kt = 0.0;
        for (size_t i = 0; i < J; ++i) kt += traj.k[i][j];
        if (Ba[j] < 1.0 - 1e-6 && Ba[j + 1] < 1.0 - 1e-6) {
            rep.max_k_rule_gap = std::max(rep.max_k_rule_gap, std::abs(kt - lam_t));
        } else if (Ba[j] >= 1.0 - 1e-9 && Ba[j + 1] >= 1.0 - 1e-9 && Qa[j] > 1e-6 &&
                   Qa[j + 1] > 1e-6) {
            rep.max_k_rule_gap =
                std::max(rep.max_k_rule_gap,
                         std::min(std::abs(kt - Da[j]), std::abs(kt - Da[j + 1])));
        }
    }
    rep.tolerance = 5.0 * traj.quad_tol;
    rep.pass = rep.max_dev_X <= rep.tolerance && rep.max_dev_B <= rep.tolerance &&
               rep.max_dev_K <= rep.tolerance &&
               rep.max_k_rule_gap <= 5.0 * cfg.dt * std::max(1.0, lam_t);
    return rep;
}

}  // namespace fluidq
