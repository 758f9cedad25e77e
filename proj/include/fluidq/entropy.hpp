#ifndef FLUIDQ_ENTROPY_HPP
#define FLUIDQ_ENTROPY_HPP

#include <span>
#include <vector>

#include "fluidq/fluid.hpp"

namespace fluidq {

// Extended relative entropy R(P||Q) = ∫ log(dP/dQ) dP with 0 log 0 = 0; +inf when
// absolute continuity fails on the grid.  P finite with a density, Q a probability
// measure with a density on the same grid resolution.
double rel_entropy(const FiniteMeasure& P, const FiniteMeasure& Q);

// |c_P - 1| + (2 c_P^{-1} |R(P||Q)| + 2 |log c_P|)^{1/2}; c_P = <1, P> > 0.
double pinsker_bound(const FiniteMeasure& P, const FiniteMeasure& Q);

// LHS - RHS of the hazard-weighted entropy estimate for a sub-probability density f:
// [∫ h f log(f/f*) - z_f log z_f] - eps_h R(mu^f || nu*), nonnegative in theory.
// Requires a service hazard bounded away from zero and infinity.
double entropy_estimate_gap(double dx, std::span<const double> f, const Distribution& service);

// Modulus of continuity of x log x on [0, c_h]: exact below e^{-1}, Lipschitz bound above.
double xlogx_modulus(double delta, double c_h);

struct EntropyTrace {
    double dt = 0.0;
    double eps_h = 0.0, c_h = 0.0;
    bool upsilon_defined = false;  // requires a bounded-away hazard
    double busy_eps = 1e-9;
    std::vector<double> t, B;
    std::vector<double> r;           // R(mu_t || nu*) from the entry-rate history
    std::vector<double> theta_mass;  // <1, theta_t>
    std::vector<double> mu_mass;     // <1, mu_t> = B - theta_mass
    std::vector<double> theta_h;     // <h, theta_t>
    std::vector<double> upsilon;     // m(<h, theta_t>); NaN when undefined
    std::vector<double> L;           // busy time ∫ 1{B=1}
    std::vector<double> tv_bound;    // Pinsker-type bound on d_TV(mu_t, nu*)
    std::vector<double> tv_actual;   // ∫ |f~ - f*|
    std::vector<double> r_running_sup;  // sup_{s<=t} |r_s|
    double c_r = 0.0;                   // sup over the whole trace
    double c_lip = 0.0;                 // Lipschitz bound for t -> r_t
    double L_end_loose = 0.0, L_end_tight = 0.0;  // busy-time sensitivity (1e-8 / 1e-10)
};

EntropyTrace entropy_trace(const FluidTrajectory& traj);

// R(mu_t||nu*) recomputed from the materialized density (cross-validation route).
double rel_entropy_from_density(const FluidTrajectory& traj, double time);

struct EnvelopeReport {
    double s = 0.0, t = 0.0;
    double lhs = 0.0, rhs = 0.0;
    double margin = 0.0;
    bool pass = false;
};

// r_t <= c_r e^{-eps_h (L(t)-L(s))} + ∫_s^t Upsilon + slack, for busy t > s.
EnvelopeReport envelope_check(const EntropyTrace& trace, double s, double t,
                              double slack = 1e-4);

struct ThetaDecayReport {
    double min_margin = 0.0;  // min over the grid of c_h e^{-eps_h t} + slack - <h, theta_t>
    bool pass = false;
};

// <h, theta_t> <= c_h e^{-eps_h t} pointwise on the grid.
ThetaDecayReport theta_decay_check(const EntropyTrace& trace, double slack = 1e-4);

}  // namespace fluidq

#endif
