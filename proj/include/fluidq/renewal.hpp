#ifndef FLUIDQ_RENEWAL_HPP
#define FLUIDQ_RENEWAL_HPP

#include <optional>
#include <vector>

#include "fluidq/fluid.hpp"

namespace fluidq {

// Renewal density u and renewal function U of the service law on a uniform grid.
struct RenewalTable {
    Distribution source;
    double dt = 0.0;
    std::vector<double> u;  // u[0] = g(0); +inf and derivative-based entries when g blows up
    std::vector<double> U;  // U[0] = 0, nondecreasing
    bool singular = false;  // g(0) = +inf: u obtained by differencing U
};

// Solves u = g + g * u (resp. U = G + U * g when g(0) = +inf) by piecewise-linear
// collocation with the kernel integrated exactly through CDF increments.
RenewalTable renewal_density(const Distribution& service, double dt, double horizon);

struct ConcavityReport {
    bool hazard_decreasing = false;  // precondition from the hazard classification
    bool nonincreasing = false;      // u nonincreasing on the grid within slack
    double first_violation_t = -1.0;
    double first_violation_jump = 0.0;
};

ConcavityReport concavity_check(const RenewalTable& table, double slack = 1e-8);

struct TauEstimate {
    double lambda_n = 0.0;
    double t_hat = 0.0;   // first grid time after which W never drops below lambda_n
    bool observed = false;  // false when W is still below the threshold at the horizon
};

struct WZTrace {
    double dt = 0.0;
    std::vector<double> t, W, Z;
    double g0 = 0.0;                    // g(0), may be +inf
    std::vector<double> lambda_n;       // empty when g(0) is not finite
    std::vector<TauEstimate> tau_n;     // estimates for n = 0..n*
    std::optional<int> n_star;          // sup{n : lambda_n < 1}; nullopt = unbounded or n/a
};

// K = W + Z decomposition along a solved trajectory plus the lambda_n / tau_n
// recursion diagnostics.  eps in (0, 1/2).
WZTrace wz_trace(const FluidTrajectory& traj, const RenewalTable& table, double lambda,
                 double eps);

// The threshold sequence lambda_n = (lambda - eps)(1 - (1 - 1/g0)^{n+1}).
std::vector<double> lambda_sequence(double lambda, double eps, double g0, int count);

// Queue ODE in the post-saturation regime (B = 1, nu = nu*, eta = lambda eta*):
// Q' = lambda Gbar_r((F^{lambda eta*})^{-1}(Q)) - 1, integrated by explicit Euler
// on internal substeps; returns Q at 0, dt, ..., horizon.
std::vector<double> q_ode_oracle(double lambda, const Distribution& patience, double q0,
                                 double dt, double horizon);

}  // namespace fluidq

#endif
