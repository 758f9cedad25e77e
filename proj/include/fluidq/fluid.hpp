#ifndef FLUIDQ_FLUID_HPP
#define FLUIDQ_FLUID_HPP

#include <span>
#include <utility>
#include <vector>

#include "fluidq/dist.hpp"
#include "fluidq/measure.hpp"

namespace fluidq {

struct FluidConfig {
    double lambda = 0.0;       // arrival rate, E(t) = lambda * t
    Distribution service;      // mean-one lifetime of jobs in service
    Distribution patience;     // lifetime before reneging
    double x0 = 0.0;           // initial total mass in system
    FiniteMeasure nu0;         // initial age measure, mass = min(x0, 1)
    FiniteMeasure eta0;        // initial potential-queue measure (continuous)
    double dt = 0.01;
    double horizon = 10.0;
    int snap_every = 0;        // store nu/eta snapshots every this many steps (0 = endpoints only)
};

// Throws ConfigError when cfg violates the state-space membership conditions.
void validate(const FluidConfig& cfg);

// Discretized solution of the single-class fluid equations.
struct FluidTrajectory {
    FluidConfig cfg;
    double dt = 0.0;
    int n = 0;  // grid points t_j = j*dt, j = 0..n
    std::vector<double> t, X, B, Q, K, D, R, S;
    std::vector<double> k;            // entry rate on [t_j, t_{j+1}), padded at j = n
    std::vector<double> dep_rate;     // <h_s, nu_t>
    std::vector<double> renege_rate;  // actual reneging rate
    std::vector<double> pot_rate;     // <h_r, eta_t>, the potential reneging rate
    std::vector<double> theta_mass;   // transported-initial-mass <1, theta_t>
    std::vector<double> theta_h;      // <h_s, theta_t>
    std::vector<std::pair<double, FiniteMeasure>> nu_snapshots, eta_snapshots;
    double quad_tol = 0.0;  // scheme tolerance used by the self-checks

    size_t index_of(double time) const;            // nearest grid index (must be on-grid)
    FiniteMeasure nu_at(double time) const;        // age measure from the entry-rate history, closed transport form
    FiniteMeasure eta_at_time(double time) const;  // potential-queue measure, closed transport form
    double nu_mass_from_history(double time) const;  // <1, nu_t> by product integration
};

FluidTrajectory solve(const FluidConfig& cfg);

// Aggregate-check hook: reneging is read from a per-grid-point rate path instead
// of the potential-queue machinery (eta0 is ignored).
FluidTrajectory solve_with_renege_path(const FluidConfig& cfg, std::span<const double> renege);

// Potential-queue measure at time t: eta0 transported and reweighted, plus the
// fresh-arrival density lambda*Gbar_r on [0, t].  No time stepping involved.
FiniteMeasure eta_at(const FluidConfig& cfg, double t);

// <psi, nu_t> per the closed representation: transported initial part plus the
// entry-rate convolution; k_history holds node samples on a dt grid covering [0, t].
double nu_functional(const std::function<double(double)>& psi, const FiniteMeasure& nu0,
                     std::span<const double> k_history, double dt, double t,
                     const Distribution& service);

// Reneging rate for queue length Q against the potential-queue measure eta_t:
// integrates the patience hazard over [0, (F^eta)^{-1}(Q)].
double reneging_rate(double Q, const FiniteMeasure& eta_t, const Distribution& patience);

struct ShiftReport {
    double t_cut = 0.0;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Re-solves from the on-grid state at t_cut and compares the tail against the
// original trajectory (semigroup property of the dynamics).
ShiftReport time_shift_check(const FluidConfig& cfg, double t_cut);

}  // namespace fluidq

#endif
