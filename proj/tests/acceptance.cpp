// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
// Run a subset by listing criterion numbers as arguments.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fluidq/des.hpp"
#include "fluidq/entropy.hpp"
#include "fluidq/fluid.hpp"
#include "fluidq/invariant.hpp"
#include "fluidq/multiclass.hpp"
#include "fluidq/renewal.hpp"

using namespace fluidq;

namespace {

int g_failures = 0;

void report(int num, bool pass, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %2d: %s  [%s]\n", pass ? "PASS" : "FAIL", num, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

FiniteMeasure survival_grid(const Distribution& d, double target_mass, double dx, double tail_tol) {
    double xmax = 1.0;
    if (std::isfinite(d.support_end())) {
        xmax = d.support_end();
    } else {
        while (d.mean() - d.integrated_survival(xmax) > tail_tol && xmax < 1e9) xmax *= 2.0;
    }
    const size_t n = size_t(std::ceil(xmax / dx)) + 1;
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = d.survival(dx * double(i));
    double mass = 0.5 * (v.front() + v.back());
    for (size_t i = 1; i + 1 < n; ++i) mass += v[i];
    mass *= dx;
    for (auto& x : v) x *= target_mass / mass;
    return FiniteMeasure::from_density(dx, std::move(v));
}

FluidConfig exp_exp(double lambda, double theta, double dt, double horizon) {
    return FluidConfig{lambda,
                       Distribution::exponential(1.0),
                       Distribution::exponential(theta),
                       0.0,
                       FiniteMeasure(),
                       FiniteMeasure(),
                       dt,
                       horizon};
}

// criterion 1: subcritical convergence to (lambda, lambda nu*, lambda eta*)
void criterion1() {
    const double tol_x = 1e-3, tol_bl = 5e-3;
    auto cfg = exp_exp(0.5, 1.0, 0.01, 30.0);
    auto traj = solve(cfg);
    const size_t j = traj.index_of(30.0);
    const double ex = std::abs(traj.X[j] - 0.5);
    const double eb = std::abs(traj.B[j] - 0.5);
    auto st = invariant_state(0.5, cfg.service, cfg.patience, 0.01, 1e-12);
    const double bl_nu = distances(traj.nu_at(30.0), st.nu_component).bl;
    const double bl_eta = distances(traj.eta_at_time(30.0), st.eta_component).bl;
    const bool pass = ex < tol_x && eb < tol_x && bl_nu < tol_bl && bl_eta < tol_bl;
    report(1, pass, "subcritical convergence (exp/exp, lambda = 0.5)",
           fmt("|X-0.5|=%.2e |B-0.5|=%.2e BL(nu)=%.2e BL(eta)=%.2e (tol %g / %g)", ex, eb, bl_nu,
               bl_eta, tol_x, tol_bl));
}

// criterion 2: supercritical saturation and entropy decay
void criterion2(FluidTrajectory& out_traj) {
    auto cfg = exp_exp(2.0, 1.0, 0.01, 50.0);
    auto traj = solve(cfg);
    size_t jT = 0;
    while (jT < traj.B.size() && traj.B[jT] < 1.0) ++jT;
    bool pinned = jT < traj.B.size();
    for (size_t j = jT; j < traj.B.size() && pinned; ++j) pinned = traj.B[j] == 1.0;
    auto tr = entropy_trace(traj);
    const size_t last = traj.index_of(50.0);
    const double r50 = std::abs(tr.r[last]);
    bool pinsker_ok = true;
    for (size_t j = 0; j < tr.t.size(); ++j)
        if (std::isfinite(tr.tv_bound[j]) && tr.tv_actual[j] > tr.tv_bound[j] + 1e-9)
            pinsker_ok = false;
    const double edep = std::abs(traj.dep_rate[last] - 1.0);
    auto st = invariant_state(2.0, cfg.service, cfg.patience, 0.01, 1e-12);
    const double eq = std::abs(traj.Q[last] - (st.x_star - 1.0));
    const bool pass = pinned && r50 < 1e-3 && pinsker_ok && edep < 1e-3 && eq < 1e-3;
    report(2, pass, "supercritical saturation and entropy decay (lambda = 2)",
           fmt("T=%.2f r(50)=%.2e pinsker=%s |<h,nu>-1|=%.2e |Q-(x*-1)|=%.2e (tol 1e-3)",
               pinned ? traj.t[jT] : -1.0, r50, pinsker_ok ? "ok" : "violated", edep, eq));
    out_traj = std::move(traj);
}

// criterion 3: critical case with a decreasing (Weibull 0.5) hazard
void criterion3(FluidTrajectory& out_traj) {
    auto service = make_distribution({Family::Weibull, {0.5}}, Role::Service);
    FluidConfig cfg{1.0,          service, Distribution::exponential(1.0), 0.0, FiniteMeasure(),
                    FiniteMeasure(), 0.005,  100.0};
    auto traj = solve(cfg);
    const size_t last = traj.index_of(100.0);
    const double b100 = traj.B[last];
    // Empty start makes W = B - theta_mass = B.  Monotone trend: no dips beyond
    // quadrature noise across coarse checkpoints.
    double worst_dip = 0.0;
    double running = 0.0;
    for (double t = 1.0; t <= 100.0; t += 1.0) {
        const size_t j = traj.index_of(t);
        const double w = traj.B[j] - traj.theta_mass[j];
        worst_dip = std::max(worst_dip, running - w);
        running = std::max(running, w);
    }
    const bool pass = b100 > 0.99 && worst_dip < 1e-6;
    report(3, pass, "critical case, decreasing hazard (Weibull 0.5)",
           fmt("B(100)=%.5f (>0.99) max W dip=%.2e (<1e-6)", b100, worst_dip));
    out_traj = std::move(traj);
}

// criterion 4: hazard-weighted entropy estimate gap over randomized densities
void criterion4() {
    std::vector<Distribution> laws = {
        Distribution::exponential(1.0),
        make_distribution({Family::HyperExponential, {0.5, 0.5, 0.5, 2.0}}, Role::Service),
        make_distribution({Family::HyperExponential, {0.3, 0.7, 0.4, 2.5}}, Role::Service),
    };
    std::mt19937 rng(20240808);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double dx = 0.01, xmax = 40.0;
    const size_t n = size_t(xmax / dx) + 1;
    double worst = 0.0;
    for (const auto& law : laws) {
        for (int rep = 0; rep < 100; ++rep) {
            const double a = 0.2 + 3.0 * u(rng);
            const double c1 = 0.8 * u(rng);
            const double c2 = u(rng) * (1.0 - c1);
            std::vector<double> f(n, 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double x = dx * double(i);
                f[i] = c2 * law.survival(x) + (x <= a ? c1 / a : 0.0);
            }
            worst = std::min(worst, entropy_estimate_gap(dx, f, law));
        }
    }
    report(4, worst >= -1e-8, "entropy estimate gap on 100 random densities x 3 laws",
           fmt("min gap = %.3e (>= -1e-8)", worst));
}

// criterion 5: Pinsker chain pointwise on the criterion 1-3 trajectories
void criterion5(const FluidTrajectory& t2, const FluidTrajectory& t3) {
    auto cfg1 = exp_exp(0.5, 1.0, 0.01, 30.0);
    auto t1 = solve(cfg1);
    double worst = -1e9;
    long checked = 0;
    for (const FluidTrajectory* traj : std::initializer_list<const FluidTrajectory*>{&t1, &t2, &t3}) {
        auto tr = entropy_trace(*traj);
        for (size_t j = 0; j < tr.t.size(); ++j) {
            if (!std::isfinite(tr.tv_bound[j])) continue;
            worst = std::max(worst, tr.tv_actual[j] - tr.tv_bound[j]);
            ++checked;
        }
    }
    report(5, worst <= 1e-9, "Pinsker-type bound dominates d_TV on criteria 1-3",
           fmt("max(tv - bound) = %.3e over %ld grid points (<= 0)", worst, checked));
}

// criterion 6: entropy envelope and theta decay on the criterion-2 trajectory
void criterion6(const FluidTrajectory& t2) {
    auto tr = entropy_trace(t2);
    double min_margin = 1e300;
    long pairs = 0;
    bool ok = true;
    for (double s : {0.0, 5.0, 10.0, 20.0, 30.0}) {
        for (double t = s + 1.0; t <= 50.0; t += 1.0) {
            const size_t jt = size_t(std::lround(t / tr.dt));
            if (tr.B[jt] < 1.0 - tr.busy_eps) continue;
            auto rep = envelope_check(tr, s, t, 1e-4);
            min_margin = std::min(min_margin, rep.margin);
            ok = ok && rep.pass;
            ++pairs;
        }
    }
    auto decay = theta_decay_check(tr, 1e-4);
    ok = ok && decay.pass;
    report(6, ok, "entropy envelope and theta decay (criterion-2 trajectory)",
           fmt("%ld (s,t) pairs, min envelope margin=%.2e, theta-decay margin=%.2e (slack 1e-4)",
               pairs, min_margin, decay.min_margin));
}

// criterion 7: renewal oracles and the K = W + Z decomposition
void criterion7(const FluidTrajectory& t3) {
    auto exp_table = renewal_density(Distribution::exponential(1.0), 0.01, 10.0);
    double e_exp = 0.0;
    for (double u : exp_table.u) e_exp = std::max(e_exp, std::abs(u - 1.0));

    std::vector<double> erl;
    for (double x = 0.0; x <= 18.0 + 2.5e-4; x += 5e-4) erl.push_back(4.0 * x * std::exp(-2.0 * x));
    auto erl_table = renewal_density(Distribution::gridded(5e-4, erl), 0.01, 8.0);
    double e_erl = 0.0;
    for (size_t j = 0; j < erl_table.u.size(); ++j)
        e_erl = std::max(e_erl,
                         std::abs(erl_table.u[j] - (1.0 - std::exp(-4.0 * 0.01 * double(j)))));

    auto w05 = make_distribution({Family::Weibull, {0.5}}, Role::Service);
    auto w_table = renewal_density(w05, t3.dt, t3.cfg.horizon);
    auto conc = concavity_check(w_table);

    auto wz = wz_trace(t3, w_table, t3.cfg.lambda, 0.25);
    double e_wz = 0.0;
    for (size_t j = 0; j < wz.t.size(); ++j)
        e_wz = std::max(e_wz, std::abs(t3.K[j] - wz.W[j] - wz.Z[j]));

    const bool pass = e_exp < 1e-6 && e_erl < 1e-5 && conc.nonincreasing && e_wz < 5e-4;
    report(7, pass, "renewal oracles and K = W + Z",
           fmt("exp err=%.2e (<1e-6) erlang2 err=%.2e (<1e-5) weibull u nonincr=%s K-W-Z=%.2e "
               "(<5e-4)",
               e_exp, e_erl, conc.nonincreasing ? "yes" : "no", e_wz));
}

// criterion 8: multiclass priority limits
void criterion8() {
    auto service = Distribution::exponential(1.0);
    bool pass = true;
    std::string detail;
    {
        MulticlassConfig mc{3, {0.5, 0.8, 0.5}, {1.0, 1.0, 1.0}, service, {}, {}, 0.01, 100.0};
        auto tr = solve_multiclass(mc);
        const size_t last = tr.t.size() - 1;
        double eq = 0.0;
        for (int i = 0; i < 3; ++i)
            eq = std::max(eq, std::abs(tr.Q[size_t(i)][last] - tr.q[size_t(i)]));
        double bl = 0.0;
        for (int i = 0; i < 3; ++i) {
            auto target = tr.rho[size_t(i)] > 0.0
                              ? survival_grid(service, tr.rho[size_t(i)], 0.01, 1e-12)
                              : FiniteMeasure();
            bl = std::max(bl, distances(tr.nu_at(i, 100.0), target).bl);
        }
        bool prio = true;
        for (size_t j = 0; j < tr.t.size(); ++j) {
            if (tr.Q[0][j] > 1e-6 && (tr.k[1][j] > 1e-9 || tr.k[2][j] > 1e-9)) prio = false;
            if (tr.Q[1][j] > 1e-6 && tr.k[2][j] > 1e-9) prio = false;
        }
        pass = pass && eq < 1e-3 && bl < 5e-3 && prio;
        detail = fmt("typical: max|Q_i-q_i|=%.2e (<1e-3) max BL=%.2e (<5e-3) priority=%s", eq, bl,
                     prio ? "ok" : "violated");
    }
    {
        MulticlassConfig mc{2, {1.0, 0.5}, {1.0, 1.0}, service, {}, {}, 0.01, 100.0};
        auto tr = solve_multiclass(mc);
        const size_t last = tr.t.size() - 1;
        double eq = 0.0;
        for (int i = 0; i < 2; ++i)
            eq = std::max(eq, std::abs(tr.Q[size_t(i)][last] - tr.q[size_t(i)]));
        double bl = 0.0;
        for (int i = 0; i < 2; ++i) {
            auto target = tr.rho[size_t(i)] > 0.0
                              ? survival_grid(service, tr.rho[size_t(i)], 0.01, 1e-12)
                              : FiniteMeasure();
            bl = std::max(bl, distances(tr.nu_at(i, 100.0), target).bl);
        }
        pass = pass && eq < 1e-2 && bl < 1e-2;
        detail += fmt(" | borderline: max|Q_i-q_i|=%.2e max BL=%.2e (<1e-2)", eq, bl);
    }
    report(8, pass, "multiclass priority limits (Q_i -> q_i, nu_i => rho_i nu*)", detail);
}

// criterion 9: interchange of limits via the DES
void criterion9() {
    auto cfg = exp_exp(2.0, 1.0, 0.01, 60.0);
    auto traj = solve(cfg);
    const double fluid_x = traj.X.back();
    auto st = invariant_state(2.0, cfg.service, cfg.patience, 0.01, 1e-12);

    auto des_cfg = [&](int N) {
        DesConfig d;
        d.N = N;
        d.interarrival = Distribution::exponential(1.0);
        d.service = Distribution::exponential(1.0);
        d.classes = {{2.0, Distribution::exponential(1.0)}};
        d.seed = 987654321u;
        d.horizon = 260.0;
        d.warmup = 40.0;
        return d;
    };
    auto s500 = stationary_estimate(des_cfg(500), 20);
    const double bd500 = birthdeath_oracle(2.0, 1.0, 500);
    const double d_fluid = std::abs(s500.x_mean - fluid_x);
    const double d_bd = std::abs(s500.x_mean - bd500);
    const double tol = std::max(3.0 * s500.x_se, 0.05);
    auto s200 = stationary_estimate(des_cfg(200), 20);
    auto s800 = stationary_estimate(des_cfg(800), 20);
    const double e200 = std::abs(s200.x_mean - st.x_star);
    const double e800 = std::abs(s800.x_mean - st.x_star);
    const bool shrink = e800 <= e200;
    const bool pass = d_fluid <= tol && d_bd <= tol && shrink;
    report(9, pass, "interchange of limits (DES stationary vs fluid fixed point)",
           fmt("N=500: |des-fluid|=%.4f |des-bd|=%.4f (tol max(3se,0.05)=%.4f, se=%.4f); "
               "err N=200 %.4f -> N=800 %.4f shrink=%s",
               d_fluid, d_bd, tol, s500.x_se, e200, e800, shrink ? "yes" : "no"));
}

// criterion 10: structural suites over 50 randomized admissible scenarios
void criterion10() {
    std::mt19937 rng(1234321);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Distribution> services = {
        Distribution::exponential(1.0),
        make_distribution({Family::Weibull, {1.6}}, Role::Service),
        make_distribution({Family::HyperExponential, {0.5, 0.5, 0.5, 2.0}}, Role::Service),
        make_distribution({Family::Weibull, {0.7}}, Role::Service),
    };
    std::vector<Distribution> patiences = {
        Distribution::exponential(1.0),
        Distribution::exponential(0.5),
        Distribution::weibull(1.5, 1.0),
    };
    bool pass = true;
    std::string first_fail;
    double worst_consv = 0.0, worst_ratio = 1e9;
    int ratio_checked = 0;
    for (int rep = 0; rep < 50 && pass; ++rep) {
        const double lam = 0.3 + 2.0 * u(rng);
        const double x0 = (rep % 3 == 1) ? 0.4 + u(rng)
                          : (rep % 3 == 2) ? 1.0 + 0.8 * u(rng)
                                           : 0.0;
        const Distribution service = services[size_t(rep) % services.size()];
        const Distribution patience = patiences[size_t(rep) % patiences.size()];
        // measure grids refine together with the time step
        auto make_cfg = [&](double dt) {
            FluidConfig c{lam, service, patience, x0, FiniteMeasure(), FiniteMeasure(), dt, 8.0};
            if (x0 > 0.0) {
                c.nu0 = survival_grid(service, std::min(x0, 1.0), dt, 1e-10);
                c.eta0 = survival_grid(patience, std::max(x0 - 1.0, 0.0) + 0.5 * lam + 0.5, dt,
                                       1e-10);
            }
            return c;
        };
        auto cfg = make_cfg(0.02);
        auto traj = solve(cfg);
        double consv = 0.0;
        for (size_t j = 0; j < traj.t.size(); ++j) {
            if (std::abs(traj.Q[j] - std::max(traj.X[j] - 1.0, 0.0)) > 1e-8) {
                pass = false;
                first_fail = fmt("rep %d: Q != (X-1)+", rep);
            }
            if (std::abs((1.0 - traj.B[j]) - std::max(1.0 - traj.X[j], 0.0)) > 1e-8) {
                pass = false;
                first_fail = fmt("rep %d: non-idling violated", rep);
            }
            consv = std::max(consv, std::abs(traj.Q[0] + lam * traj.t[j] -
                                             (traj.Q[j] + traj.K[j] + traj.R[j])));
        }
        worst_consv = std::max(worst_consv, consv);
        if (consv > traj.quad_tol) {
            pass = false;
            first_fail = fmt("rep %d: conservation %.2e > %.2e", rep, consv, traj.quad_tol);
        }
        auto shift = time_shift_check(cfg, 4.0);
        if (!shift.pass) {
            pass = false;
            first_fail = fmt("rep %d: time shift dev %.2e", rep, shift.max_deviation);
        }
        // dt-halving convergence against a dt/8 reference
        auto tref = solve(make_cfg(cfg.dt / 8.0));
        auto err_at = [&](double dt) {
            auto tr = solve(make_cfg(dt));
            double e = 0.0;
            for (double t = 1.0; t <= 8.0; t += 1.0)
                e = std::max(e, std::abs(tr.X[tr.index_of(t)] - tref.X[tref.index_of(t)]));
            return e;
        };
        const double e1 = err_at(cfg.dt), e2 = err_at(cfg.dt / 2.0);
        if (e1 > 1e-7) {  // below that both grids sit at rounding noise
            ++ratio_checked;
            worst_ratio = std::min(worst_ratio, e1 / e2);
            if (e1 / e2 < 1.8) {
                pass = false;
                first_fail = fmt("rep %d: halving factor %.2f", rep, e1 / e2);
            }
        }
    }
    report(10, pass, "structural suites on 50 randomized scenarios",
           pass ? fmt("max conservation gap %.2e; min halving factor %.2f (%d scenarios checked)",
                      worst_consv, worst_ratio, ratio_checked)
                : first_fail);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> want;
    for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
    auto wanted = [&](int c) { return want.empty() || want.count(c) > 0; };

    FluidTrajectory t2, t3;
    bool have_t2 = false, have_t3 = false;

    try {
        if (wanted(1)) criterion1();
        if (wanted(2) || wanted(5) || wanted(6)) {
            criterion2(t2);
            have_t2 = true;
        }
        if (wanted(3) || wanted(5) || wanted(7)) {
            criterion3(t3);
            have_t3 = true;
        }
        if (wanted(4)) criterion4();
        if (wanted(5) && have_t2 && have_t3) criterion5(t2, t3);
        if (wanted(6) && have_t2) criterion6(t2);
        if (wanted(7) && have_t3) criterion7(t3);
        if (wanted(8)) criterion8();
        if (wanted(9)) criterion9();
        if (wanted(10)) criterion10();
    } catch (const std::exception& e) {
        std::printf("FAIL: acceptance run aborted: %s\n", e.what());
        return 99;
    }
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
    } else {
        std::printf("%d criterion(s) failed\n", g_failures);
    }
    return g_failures;
}
