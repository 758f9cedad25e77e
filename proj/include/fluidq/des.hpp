#ifndef FLUIDQ_DES_HPP
#define FLUIDQ_DES_HPP

#include <cstdint>
#include <vector>

#include "fluidq/dist.hpp"
#include "fluidq/measure.hpp"

namespace fluidq {

// One class of a (possibly multiclass) N-server simulation.
struct DesClassSpec {
    double lambda = 1.0;    // fluid-scale arrival rate; the class arrival rate is N*lambda
    Distribution patience;  // per-class patience law
};

struct DesConfig {
    int N = 1;
    Distribution interarrival;  // renewal base law, rescaled so each class has rate N*lambda_i
    Distribution service;       // common service law
    std::vector<DesClassSpec> classes;  // at least one
    std::uint64_t seed = 1;
    double horizon = 100.0;
    double warmup = 0.0;
    double sample_every = 0.1;
    std::vector<double> snapshot_times;  // age-measure snapshots (scaled atoms)
    bool audit = false;                  // per-event work-conservation / priority audit
};

void validate(const DesConfig& cfg);

struct DesMeasureSnapshot {
    double t = 0.0;
    std::vector<double> nu_ages;   // ages of jobs in service, one atom of mass 1/N each
    std::vector<double> eta_ages;  // elapsed times of jobs still in the potential queue
    FiniteMeasure nu_measure(int N) const;
    FiniteMeasure eta_measure(int N) const;
};

struct DesTrajectory {
    std::uint64_t seed = 0;
    std::vector<double> t, Xbar, Bbar, Qbar;        // scaled processes on the sample grid
    std::vector<std::vector<double>> Qbar_class;    // per class
    std::vector<DesMeasureSnapshot> snapshots;
    // exact event-time integrals over [warmup, horizon] and the batch splits
    double time_span = 0.0;
    double integral_X = 0.0, integral_B = 0.0, integral_Q = 0.0;
    std::vector<double> batch_X, batch_B, batch_Q;  // batch means (20 batches)
    long arrivals = 0, departures = 0, reneges = 0, in_system_end = 0;
    bool audit_clean = true;
};

DesTrajectory simulate(const DesConfig& cfg);

struct StationarySummary {
    int replications = 0;
    double x_mean = 0.0, x_se = 0.0;
    double b_mean = 0.0, b_se = 0.0;
    double q_mean = 0.0, q_se = 0.0;
    std::vector<double> psi_means, psi_ses;  // dictionary: 1, age, e^{-age}, 1{age<=1}
    double batch_autocorr = 0.0;             // lag-1 autocorrelation of batch means
    bool autocorr_warning = false;           // exceeds 0.2: estimate unreliable
};

// Batch-means long-run estimates across independent replications (parallel, with
// one RNG stream per replication split from the master seed).
StationarySummary stationary_estimate(const DesConfig& cfg, int replications);

// Exact stationary mean/N of the M/M/N+M birth-death chain with birth rate
// N*lambda, unit service rate and reneging rate theta.
double birthdeath_oracle(double lambda, double theta, int N);

}  // namespace fluidq

#endif
