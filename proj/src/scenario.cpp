#include "fluidq/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fluidq/des.hpp"
#include "fluidq/entropy.hpp"
#include "fluidq/fluid.hpp"
#include "fluidq/invariant.hpp"
#include "fluidq/multiclass.hpp"
#include "fluidq/renewal.hpp"

namespace fluidq {

namespace {

using nlohmann::json;

// Deterministic number formatting so re-runs are byte-identical.
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

[[noreturn]] void missing(const std::string& path) {
    throw ConfigError("scenario field missing or invalid: " + path);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) missing(path + "." + key);
    return j.at(key);
}

double require_num(const json& j, const std::string& key, const std::string& path) {
    const auto& v = require(j, key, path);
    if (!v.is_number()) missing(path + "." + key);
    return v.get<double>();
}

double opt_num(const json& j, const std::string& key, double fallback) {
    if (j.is_object() && j.contains(key)) return j.at(key).get<double>();
    return fallback;
}

DistSpec parse_dist_spec(const json& j, const std::string& path) {
    DistSpec spec;
    spec.family = family_from_name(require(j, "family", path).get<std::string>());
    const json params = j.contains("params") ? j.at("params") : json::object();
    switch (spec.family) {
        case Family::Exponential:
            spec.params = {require_num(params, "rate", path + ".params")};
            break;
        case Family::Weibull:
            spec.params = {require_num(params, "shape", path + ".params")};
            if (params.contains("scale")) spec.params.push_back(params.at("scale").get<double>());
            break;
        case Family::HyperExponential: {
            auto probs = require(params, "probs", path + ".params").get<std::vector<double>>();
            auto rates = require(params, "rates", path + ".params").get<std::vector<double>>();
            spec.params = probs;
            spec.params.insert(spec.params.end(), rates.begin(), rates.end());
            break;
        }
        case Family::LogNormal:
            spec.params = {require_num(params, "mu", path + ".params"),
                           require_num(params, "sigma", path + ".params")};
            break;
        case Family::GriddedDensity:
            spec.grid_dx = require_num(params, "dx", path + ".params");
            spec.grid_values = require(params, "values", path + ".params").get<std::vector<double>>();
            break;
    }
    return spec;
}

Distribution parse_dist(const json& j, const std::string& path, Role fallback_role) {
    Role role = fallback_role;
    if (j.contains("role")) {
        const auto r = j.at("role").get<std::string>();
        if (r == "service") {
            role = Role::Service;
        } else if (r == "patience") {
            role = Role::Patience;
        } else {
            missing(path + ".role");
        }
    }
    return make_distribution(parse_dist_spec(j, path), role);
}

struct Loaded {
    json j;
    std::string name;
    double dt = 0.01;
    double horizon = 10.0;
    int snap_every = 0;
    double tail_tol = 1e-10;
};

Loaded load(const std::string& path, const RunOptions& opts) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    Loaded ld;
    try {
        in >> ld.j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("scenario file is not valid JSON: ") + e.what());
    }
    if (!ld.j.contains("schema_version") || ld.j.at("schema_version").get<int>() != 1)
        throw ConfigError("scenario field missing or invalid: schema_version (expected 1)");
    ld.name = ld.j.contains("name") ? ld.j.at("name").get<std::string>() : "scenario";
    const json numerics = ld.j.contains("numerics") ? ld.j.at("numerics") : json::object();
    ld.dt = opt_num(numerics, "dt", 0.01);
    ld.horizon = opt_num(numerics, "horizon", 10.0);
    ld.snap_every = int(opt_num(numerics, "snap_every", 0));
    ld.tail_tol = opt_num(numerics, "tail_tol", 1e-10);
    if (opts.dt_override) ld.dt = *opts.dt_override;
    if (opts.seed_override && ld.j.contains("des")) ld.j["des"]["seed"] = *opts.seed_override;
    return ld;
}

FluidConfig build_fluid_config(const Loaded& ld) {
    const json& j = ld.j;
    FluidConfig cfg;
    cfg.lambda = require_num(j, "lambda", "$");
    cfg.service = parse_dist(require(j, "service", "$"), "service", Role::Service);
    cfg.patience = parse_dist(require(j, "patience", "$"), "patience", Role::Patience);
    cfg.dt = ld.dt;
    cfg.horizon = ld.horizon;
    cfg.snap_every = ld.snap_every;
    const json init = j.contains("init") ? j.at("init") : json{{"kind", "empty"}};
    const auto kind = require(init, "kind", "init").get<std::string>();
    if (kind == "empty") {
        cfg.x0 = 0.0;
    } else if (kind == "invariant") {
        auto st = invariant_state(cfg.lambda, cfg.service, cfg.patience, cfg.dt, ld.tail_tol);
        if (!st.unique)
            throw NumericalError("invariant state is not unique; cannot build an invariant start");
        cfg.x0 = st.x_star;
        cfg.nu0 = st.nu_component;
        cfg.eta0 = st.eta_component;
    } else if (kind == "custom") {
        cfg.x0 = require_num(init, "x0", "init");
        if (init.contains("nu0")) cfg.nu0 = FiniteMeasure::from_json(init.at("nu0"));
        if (init.contains("eta0")) cfg.eta0 = FiniteMeasure::from_json(init.at("eta0"));
    } else {
        missing("init.kind (empty|invariant|custom)");
    }
    return cfg;
}

std::filesystem::path out_path(const RunOptions& opts, const Loaded& ld, const std::string& tail) {
    std::filesystem::create_directories(opts.out_dir);
    const std::string prefix = ld.j.contains("output") && ld.j.at("output").contains("prefix")
                                   ? ld.j.at("output").at("prefix").get<std::string>()
                                   : ld.name;
    return std::filesystem::path(opts.out_dir) / (prefix + tail);
}

void write_trajectory_csv(const FluidTrajectory& traj, const std::filesystem::path& p) {
    std::ofstream out(p);
    out << "t,X,B,Q,K,D,R,S,k,dep_rate,renege_rate\n";
    for (size_t j = 0; j < traj.t.size(); ++j) {
        out << num(traj.t[j]) << ',' << num(traj.X[j]) << ',' << num(traj.B[j]) << ','
            << num(traj.Q[j]) << ',' << num(traj.K[j]) << ',' << num(traj.D[j]) << ','
            << num(traj.R[j]) << ',' << num(traj.S[j]) << ',' << num(traj.k[j]) << ','
            << num(traj.dep_rate[j]) << ',' << num(traj.renege_rate[j]) << '\n';
    }
}

void write_snapshots(const FluidTrajectory& traj, const std::filesystem::path& p) {
    json snaps = json::array();
    for (size_t i = 0; i < traj.nu_snapshots.size(); ++i) {
        json rec;
        rec["t"] = traj.nu_snapshots[i].first;
        rec["nu"] = traj.nu_snapshots[i].second.to_json();
        if (i < traj.eta_snapshots.size()) rec["eta"] = traj.eta_snapshots[i].second.to_json();
        snaps.push_back(std::move(rec));
    }
    std::ofstream(p) << snaps.dump(1) << '\n';
}

json invariant_json(const InvariantState& st) {
    return json{{"lambda", st.lambda}, {"x_star", st.x_star}, {"x_l", st.x_l},
                {"x_r", st.x_r},       {"unique", st.unique}, {"nu_mass", st.nu_mass},
                {"eta_mass", st.eta_mass}};
}

int run_fluid(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto cfg = build_fluid_config(ld);
    auto traj = solve(cfg);
    write_trajectory_csv(traj, out_path(opts, ld, "_trajectory.csv"));
    write_snapshots(traj, out_path(opts, ld, "_snapshots.json"));
    const size_t last = traj.t.size() - 1;
    log << "fluid: lambda=" << num(cfg.lambda) << " horizon=" << num(cfg.horizon)
        << " X(end)=" << num(traj.X[last]) << " B(end)=" << num(traj.B[last])
        << " Q(end)=" << num(traj.Q[last]) << " (scheme tolerance " << num(traj.quad_tol)
        << ")\n";
    return kExitOk;
}

int run_invariant(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto cfg = build_fluid_config(ld);
    auto st = invariant_state(cfg.lambda, cfg.service, cfg.patience, cfg.dt, ld.tail_tol);
    std::ofstream(out_path(opts, ld, "_invariant.json")) << invariant_json(st).dump(1) << '\n';
    log << "invariant: x_star=" << num(st.x_star) << " interval=[" << num(st.x_l) << ","
        << num(st.x_r) << "] unique=" << (st.unique ? "true" : "false")
        << " (interval width tolerance 1e-08)\n";
    if (cfg.lambda > 1.0)
        log << "invariant: uniqueness sufficient condition: "
            << (uniqueness_check(cfg.lambda, cfg.patience) ? "holds" : "fails")
            << " (root interval tolerance 1e-08)\n";
    return kExitOk;
}

int run_entropy(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto cfg = build_fluid_config(ld);
    auto traj = solve(cfg);
    auto tr = entropy_trace(traj);
    std::ofstream out(out_path(opts, ld, "_entropy.csv"));
    out << "t,r,theta_mass,mu_mass,upsilon,L,tv_bound,tv_actual\n";
    for (size_t j = 0; j < tr.t.size(); ++j) {
        out << num(tr.t[j]) << ',' << num(tr.r[j]) << ',' << num(tr.theta_mass[j]) << ','
            << num(tr.mu_mass[j]) << ',' << num(tr.upsilon[j]) << ',' << num(tr.L[j]) << ','
            << num(tr.tv_bound[j]) << ',' << num(tr.tv_actual[j]) << '\n';
    }
    log << "entropy: r(end)=" << num(tr.r.back()) << " mu_mass(end)=" << num(tr.mu_mass.back())
        << " L(end)=" << num(tr.L.back()) << " [busy threshold 1-1e-9; L at 1e-8/1e-10: "
        << num(tr.L_end_loose) << "/" << num(tr.L_end_tight) << "]\n";
    if (tr.upsilon_defined) {
        auto decay = theta_decay_check(tr);
        log << "entropy: theta-decay bound margin=" << num(decay.min_margin)
            << " (slack 1e-04) -> " << (decay.pass ? "pass" : "FAIL") << "\n";
        // envelope at a representative busy pair
        size_t jt = tr.t.size() - 1;
        while (jt > 0 && tr.B[jt] < 1.0 - tr.busy_eps) --jt;
        if (jt > 0) {
            auto rep = envelope_check(tr, 0.0, tr.t[jt]);
            log << "entropy: envelope at (0," << num(tr.t[jt]) << ") margin=" << num(rep.margin)
                << " (slack 1e-04) -> " << (rep.pass ? "pass" : "FAIL") << "\n";
        }
    }
    return kExitOk;
}

int run_renewal(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto cfg = build_fluid_config(ld);
    const double eps = ld.j.contains("renewal") ? opt_num(ld.j.at("renewal"), "eps", 0.25) : 0.25;
    auto traj = solve(cfg);
    auto table = renewal_density(cfg.service, cfg.dt, cfg.horizon);
    auto wz = wz_trace(traj, table, cfg.lambda, eps);
    std::ofstream out(out_path(opts, ld, "_renewal.csv"));
    out << "t,u,U,W,Z\n";
    for (size_t j = 0; j < wz.t.size(); ++j) {
        out << num(wz.t[j]) << ',' << num(table.u[j]) << ',' << num(table.U[j]) << ','
            << num(wz.W[j]) << ',' << num(wz.Z[j]) << '\n';
    }
    json rec;
    rec["lambda_n"] = wz.lambda_n;
    rec["tau_n_estimates"] = json::array();
    for (const auto& te : wz.tau_n)
        rec["tau_n_estimates"].push_back(
            {{"lambda_n", te.lambda_n},
             {"estimate", te.observed ? json(te.t_hat) : json(nullptr)},
             {"observed", te.observed}});
    rec["n_star"] = wz.n_star ? json(*wz.n_star) : json(nullptr);
    std::ofstream(out_path(opts, ld, "_renewal.json")) << rec.dump(1) << '\n';

    auto conc = concavity_check(table);
    double kwz = 0.0;
    for (size_t j = 0; j < wz.t.size(); ++j)
        kwz = std::max(kwz, std::abs(traj.K[j] - wz.W[j] - wz.Z[j]));
    log << "renewal: u(0)=" << num(table.u[0]) << " u nonincreasing="
        << (conc.nonincreasing ? "true" : "false") << " (slack 1e-08), max|K-(W+Z)|=" << num(kwz)
        << "\n";
    return kExitOk;
}

int run_multiclass(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    const json& j = ld.j;
    const json mc = require(j, "multiclass", "$");
    MulticlassConfig cfg;
    cfg.lambda = require(mc, "lambdas", "multiclass").get<std::vector<double>>();
    cfg.theta = require(mc, "thetas", "multiclass").get<std::vector<double>>();
    cfg.J = int(cfg.lambda.size());
    cfg.service = parse_dist(require(j, "service", "$"), "service", Role::Service);
    if (j.contains("patience")) {
        const auto fam = require(j.at("patience"), "family", "patience").get<std::string>();
        if (fam != "exponential")
            throw ConfigError(
                "multiclass reneging must be exponential (field patience.family); use thetas");
    }
    cfg.dt = ld.dt;
    cfg.horizon = ld.horizon;
    cfg.snap_every = ld.snap_every;
    auto tr = solve_multiclass(cfg);

    std::ofstream out(out_path(opts, ld, "_multiclass.csv"));
    out << "t";
    for (int i = 1; i <= cfg.J; ++i)
        out << ",X_" << i << ",B_" << i << ",Q_" << i << ",K_" << i << ",D_" << i << ",R_" << i
            << ",k_" << i;
    out << '\n';
    for (size_t s = 0; s < tr.t.size(); ++s) {
        out << num(tr.t[s]);
        for (size_t i = 0; i < size_t(cfg.J); ++i)
            out << ',' << num(tr.X[i][s]) << ',' << num(tr.B[i][s]) << ',' << num(tr.Q[i][s])
                << ',' << num(tr.K[i][s]) << ',' << num(tr.D[i][s]) << ',' << num(tr.R[i][s])
                << ',' << num(tr.k[i][s]);
        out << '\n';
    }

    const size_t last = tr.t.size() - 1;
    double sup_err = 0.0;
    json sup_json = json::object();
    for (size_t i = 0; i < size_t(cfg.J); ++i) {
        const double e = std::abs(tr.Q[i][last] - tr.q[i]);
        sup_err = std::max(sup_err, e);
        sup_json["Q_" + std::to_string(i + 1)] = e;
    }
    const double conv_tol = 1e-3;
    json rec{{"rho", tr.rho},
             {"q", tr.q},
             {"converged", sup_err < conv_tol},
             {"tolerance", conv_tol},
             {"sup_errors", sup_json}};
    std::ofstream(out_path(opts, ld, "_multiclass.json")) << rec.dump(1) << '\n';
    log << "multiclass: max_i |Q_i(end) - q_i| = " << num(sup_err) << " (tolerance "
        << num(conv_tol) << ")\n";
    auto agg = aggregate_consistency(tr);
    log << "multiclass: aggregate consistency max dev = "
        << num(std::max({agg.max_dev_X, agg.max_dev_B, agg.max_dev_K})) << " (tolerance "
        << num(agg.tolerance) << ") -> " << (agg.pass ? "pass" : "FAIL") << "\n";
    return kExitOk;
}

DesConfig build_des_config(const Loaded& ld) {
    const json& j = ld.j;
    const json dj = j.contains("des") ? j.at("des") : json::object();
    DesConfig cfg;
    cfg.N = int(opt_num(dj, "n", 100));
    cfg.seed = std::uint64_t(opt_num(dj, "seed", 1));
    cfg.horizon = opt_num(dj, "horizon", ld.horizon);
    cfg.warmup = opt_num(dj, "warmup", 0.0);
    cfg.sample_every = opt_num(dj, "sample_every", 0.1);
    cfg.service = parse_dist(require(j, "service", "$"), "service", Role::Service);
    cfg.interarrival = dj.contains("interarrival")
                           ? parse_dist(dj.at("interarrival"), "des.interarrival", Role::Patience)
                           : Distribution::exponential(1.0);
    if (j.contains("multiclass")) {
        auto lam = require(j.at("multiclass"), "lambdas", "multiclass").get<std::vector<double>>();
        auto th = require(j.at("multiclass"), "thetas", "multiclass").get<std::vector<double>>();
        if (lam.size() != th.size()) throw ConfigError("multiclass.lambdas/thetas size mismatch");
        for (size_t i = 0; i < lam.size(); ++i)
            cfg.classes.push_back({lam[i], Distribution::exponential(th[i])});
    } else {
        cfg.classes.push_back({require_num(j, "lambda", "$"),
                               parse_dist(require(j, "patience", "$"), "patience", Role::Patience)});
    }
    return cfg;
}

int run_des(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto cfg = build_des_config(ld);
    const json dj = ld.j.contains("des") ? ld.j.at("des") : json::object();
    const int reps = int(opt_num(dj, "reps", 1));

    auto tr = simulate(cfg);
    std::ofstream out(out_path(opts, ld, "_des.jsonl"));
    for (size_t i = 0; i < tr.t.size(); ++i) {
        json rec{{"t", tr.t[i]}, {"x", tr.Xbar[i]}, {"b", tr.Bbar[i]}, {"q", tr.Qbar[i]}};
        if (tr.Qbar_class.size() > 1) rec["q_class"] = json::array();
        for (size_t c = 0; tr.Qbar_class.size() > 1 && c < tr.Qbar_class.size(); ++c)
            rec["q_class"].push_back(tr.Qbar_class[c][i]);
        out << rec.dump() << '\n';
    }

    json summary{{"seed", tr.seed},
                 {"arrivals", tr.arrivals},
                 {"departures", tr.departures},
                 {"reneges", tr.reneges},
                 {"in_system_end", tr.in_system_end}};
    if (reps >= 2) {
        auto st = stationary_estimate(cfg, reps);
        summary["stationary"] = {{"replications", st.replications},
                                 {"x_mean", st.x_mean},
                                 {"x_se", st.x_se},
                                 {"b_mean", st.b_mean},
                                 {"b_se", st.b_se},
                                 {"q_mean", st.q_mean},
                                 {"q_se", st.q_se},
                                 {"batch_autocorr", st.batch_autocorr},
                                 {"autocorr_warning", st.autocorr_warning}};
        log << "des: stationary Xbar = " << num(st.x_mean) << " +/- " << num(st.x_se) << " (se, "
            << reps << " reps)";
        if (st.autocorr_warning)
            log << "  WARNING: batch autocorrelation " << num(st.batch_autocorr)
                << " exceeds 0.2; estimate unreliable";
        log << "\n";
    } else {
        log << "des: single replication, time-average Xbar = "
            << num(tr.integral_X / tr.time_span) << "\n";
    }
    std::ofstream(out_path(opts, ld, "_des_summary.json")) << summary.dump(1) << '\n';
    return kExitOk;
}

int run_interchange(const Loaded& ld, const RunOptions& opts, std::ostream& log) {
    auto fcfg = build_fluid_config(ld);
    auto traj = solve(fcfg);
    auto st = invariant_state(fcfg.lambda, fcfg.service, fcfg.patience, fcfg.dt, ld.tail_tol);
    auto dcfg = build_des_config(ld);
    const json dj = ld.j.contains("des") ? ld.j.at("des") : json::object();
    const int reps = std::max(2, int(opt_num(dj, "reps", 20)));
    auto des = stationary_estimate(dcfg, reps);

    const double fluid_x = traj.X.back();
    const double abs_tol = 0.05;
    json rec{{"fluid_limit_x", fluid_x},
             {"invariant_x", st.x_star},
             {"des_stationary_x", des.x_mean},
             {"des_se", des.x_se},
             {"replications", reps},
             {"abs_tolerance", abs_tol},
             {"se_multiplier", 3.0}};
    const bool exp_exp = fcfg.service.family() == Family::Exponential &&
                         fcfg.patience.family() == Family::Exponential;
    if (exp_exp) {
        const double theta = fcfg.patience.params()[0];
        rec["birth_death_x"] = birthdeath_oracle(fcfg.lambda, theta, dcfg.N);
    }
    std::ofstream(out_path(opts, ld, "_interchange.json")) << rec.dump(1) << '\n';

    log << "interchange-of-limits table (N = " << dcfg.N << ", tolerance = 3 se and abs "
        << num(abs_tol) << "):\n";
    log << "  corner                 value\n";
    log << "  fluid large-time X     " << num(fluid_x) << "\n";
    log << "  invariant state x*     " << num(st.x_star) << "\n";
    log << "  DES stationary Xbar    " << num(des.x_mean) << " +/- " << num(des.x_se) << " (se)\n";
    if (exp_exp)
        log << "  birth-death oracle     " << num(rec["birth_death_x"].get<double>()) << "\n";
    const double dev = std::abs(des.x_mean - st.x_star);
    log << "  |DES - invariant| = " << num(dev) << " -> "
        << (dev <= std::max(3.0 * des.x_se, abs_tol) ? "pass" : "FAIL") << "\n";
    return kExitOk;
}

}  // namespace

int run_scenario(const std::string& mode, const std::string& scenario_path,
                 const RunOptions& opts, std::ostream& log) {
    try {
        Loaded ld = load(scenario_path, opts);
        if (ld.j.contains("mode") && ld.j.at("mode").get<std::string>() != mode)
            log << "note: scenario declares mode '" << ld.j.at("mode").get<std::string>()
                << "', running '" << mode << "'\n";
        if (mode == "fluid") return run_fluid(ld, opts, log);
        if (mode == "invariant") return run_invariant(ld, opts, log);
        if (mode == "entropy") return run_entropy(ld, opts, log);
        if (mode == "renewal") return run_renewal(ld, opts, log);
        if (mode == "multiclass") return run_multiclass(ld, opts, log);
        if (mode == "des") return run_des(ld, opts, log);
        if (mode == "interchange") return run_interchange(ld, opts, log);
        throw ConfigError("unknown mode: " + mode);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        log << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace fluidq
