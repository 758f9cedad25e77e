#ifndef FLUIDQ_DIST_HPP
#define FLUIDQ_DIST_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidq {

// Raised for invalid user-supplied parameters/configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation degenerates (nonfinite state, divergence; CLI exit code 1).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Family { Exponential, Weibull, HyperExponential, LogNormal, GriddedDensity };
enum class Role { Service, Patience };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// An absolutely continuous lifetime law on [0, H) with no atom at zero.
// Immutable after construction; cheap to copy and safe to share across threads.
class Distribution {
public:
    Distribution() = default;  // unit-rate exponential

    static Distribution exponential(double rate);
    static Distribution weibull(double shape, double scale = 1.0);
    static Distribution hyperexponential(std::vector<double> probs, std::vector<double> rates);
    static Distribution lognormal(double mu, double sigma);
    // Piecewise-linear density sampled at 0, dx, 2dx, ...; normalized to integrate to one.
    static Distribution gridded(double dx, std::vector<double> values);

    double survival(double x) const;         // Gbar(x) = 1 - G(x)
    double log_survival(double x) const;     // log Gbar(x), -inf where Gbar = 0
    double cdf(double x) const { return 1.0 - survival(x); }
    double density(double x) const;          // g(x); may be +inf at 0 (Weibull shape < 1)
    double hazard(double x) const;           // g/Gbar where Gbar > 0
    double integrated_survival(double x) const;  // ∫_0^x Gbar(u) du, closed form per family
    double mean() const;                     // = integrated_survival(inf)
    double support_end() const;              // H, +inf for unbounded families
    // Survival ratio Gbar(x + t) / Gbar(x); 0 when the numerator support is exhausted.
    double survival_ratio(double x, double t) const;

    // Returns a copy rescaled (x -> c*x) so that the mean equals m.
    Distribution rescaled_to_mean(double m) const;

    // Inverse-CDF sample from a uniform u in (0,1).  Deterministic transform, so a
    // fixed driving RNG yields bit-identical draws on re-runs.
    double sample(double u) const;

    Family family() const { return family_; }
    const std::vector<double>& params() const { return params_; }
    // Gridded accessors (throws for other families).
    double grid_dx() const;
    const std::vector<double>& grid_values() const;

    bool same_law(const Distribution& other, double tol = 1e-12) const;

private:
    Family family_ = Family::Exponential;
    // exponential: {rate}; weibull: {shape, scale}; hyperexponential: {p..., r...};
    // lognormal: {mu, sigma}
    std::vector<double> params_{1.0};

    struct GridData;
    std::shared_ptr<const GridData> grid_;  // GriddedDensity only
};

// Hazard-rate classification against the decreasing / bounded-away regimes.
struct HazardRegime {
    double eps_h = 0.0;              // essential infimum of the hazard
    double c_h = 0.0;                // essential supremum (+inf when unbounded)
    bool is_decreasing = false;
    bool is_bounded_away = false;    // eps_h > 0 and c_h < inf
    std::vector<double> scan_grid;   // grid used for the scan (kept for reproducibility)
};

// Analytic classification where the family admits it, otherwise a conservative
// log-spaced grid scan (10^4 points by default when scan_grid is empty).
HazardRegime classify_hazard(const Distribution& d, std::vector<double> scan_grid = {});

// Distribution spec as read from scenario files.
struct DistSpec {
    Family family;
    std::vector<double> params;      // family-specific, same layout as Distribution::params()
    double grid_dx = 0.0;            // GriddedDensity only
    std::vector<double> grid_values; // GriddedDensity only
};

// Builds the law and applies the role contract: service laws are rescaled to mean
// one, patience laws must have a finite mean.
Distribution make_distribution(const DistSpec& spec, Role role);

}  // namespace fluidq

#endif
