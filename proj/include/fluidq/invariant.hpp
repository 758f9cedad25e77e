#ifndef FLUIDQ_INVARIANT_HPP
#define FLUIDQ_INVARIANT_HPP

#include "fluidq/dist.hpp"
#include "fluidq/measure.hpp"

namespace fluidq {

// A point of the invariant manifold together with the fixed-point interval
// [x_l, x_r] of the queue equation for lambda >= 1.
struct InvariantState {
    double lambda = 0.0;
    double x_star = 0.0;
    double x_l = 0.0, x_r = 0.0;
    bool unique = true;
    FiniteMeasure nu_component;   // (lambda ^ 1) * nu_star
    FiniteMeasure eta_component;  // lambda * eta_star
    double nu_mass = 0.0;
    double eta_mass = 0.0;
    double theta_r = 0.0;  // mean patience
};

// Builds nu* and eta* on a grid with step dx (truncated where the survival tail
// integral drops below tail_tol) and solves the fixed-point equation
// G_r((F^{lambda eta*})^{-1}((x-1)^+)) = (lambda-1)/lambda by bisection.
InvariantState invariant_state(double lambda, const Distribution& service,
                               const Distribution& patience, double dx = 0.01,
                               double tail_tol = 1e-10);

// Sufficient condition for a unique invariant state when lambda > 1:
// G_r(x) = (lambda-1)/lambda has a unique root.
bool uniqueness_check(double lambda, const Distribution& patience);

}  // namespace fluidq

#endif
