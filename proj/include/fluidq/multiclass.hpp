#ifndef FLUIDQ_MULTICLASS_HPP
#define FLUIDQ_MULTICLASS_HPP

#include <span>
#include <utility>
#include <vector>

#include "fluidq/fluid.hpp"

namespace fluidq {

// J-class fluid model under nonpreemptive fixed priority (class 1 highest), with
// a common mean-one service law and exponential per-class reneging.
struct MulticlassConfig {
    int J = 0;
    std::vector<double> lambda;  // per-class arrival rates > 0
    std::vector<double> theta;   // exponential reneging rates > 0
    Distribution service;
    std::vector<double> x0;
    std::vector<FiniteMeasure> nu0;
    double dt = 0.01;
    double horizon = 10.0;
    int snap_every = 0;
};

void validate(const MulticlassConfig& cfg);

struct MulticlassTrajectory {
    MulticlassConfig cfg;
    double dt = 0.0;
    int n = 0;
    std::vector<double> t;
    // arrays indexed [class][grid point]
    std::vector<std::vector<double>> X, B, Q, K, D, R, k, dep_rate, theta_mass;
    std::vector<double> rho, q;  // long-run targets
    double quad_tol = 0.0;

    size_t index_of(double time) const;
    std::vector<double> aggregate(const std::vector<std::vector<double>>& per_class) const;
    FiniteMeasure nu_at(int cls, double time) const;  // per-class age-measure snapshot in closed transport form
};

// rho_i by the capped-cumulative construction and q_i = (lambda_i - rho_i)/theta_i.
std::pair<std::vector<double>, std::vector<double>> rho_q(std::span<const double> lambda,
                                                          std::span<const double> theta);

MulticlassTrajectory solve_multiclass(const MulticlassConfig& cfg);

struct AggregateReport {
    double max_dev_X = 0.0;
    double max_dev_B = 0.0;
    double max_dev_K = 0.0;
    double max_k_rule_gap = 0.0;  // distance of k~ from {lambda~, <h, nu~>} off switching points
    double tolerance = 0.0;
    bool pass = false;
};

// Compares the class aggregates against the single-class solver driven by the
// realized total reneging path, and checks the aggregate entry-rate rule.
AggregateReport aggregate_consistency(const MulticlassTrajectory& traj);

}  // namespace fluidq

#endif
