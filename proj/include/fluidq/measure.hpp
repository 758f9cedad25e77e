#ifndef FLUIDQ_MEASURE_HPP
#define FLUIDQ_MEASURE_HPP

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fluidq/dist.hpp"

#include <nlohmann/json_fwd.hpp>

namespace fluidq {

// Bounded or nonnegative measurable test function for pairing with measures.
struct TestFunction {
    std::function<double(double)> fn;
    double bound = std::numeric_limits<double>::infinity();
};

// Finite measure on [0, H) in the hybrid form the fluid equations produce:
// point atoms, a gridded density with trapezoid semantics, and an optional
// time-shifted part of a base measure reweighted by a survival ratio
// Gbar(x + t) / Gbar(x).  Immutable once built.
class FiniteMeasure {
public:
    struct Atom {
        double x;
        double mass;
    };
    struct ShiftedPart {
        std::shared_ptr<const FiniteMeasure> base;
        double shift = 0.0;
        Distribution reweight;
        std::string base_ref;  // label used when serializing snapshots
    };

    FiniteMeasure() = default;  // zero measure

    static FiniteMeasure from_atoms(std::vector<Atom> atoms);
    static FiniteMeasure from_density(double dx, std::vector<double> values);
    static FiniteMeasure shifted(FiniteMeasure base, double t, const Distribution& reweight,
                                 std::string base_ref = "base");

    FiniteMeasure with_atoms(std::vector<Atom> atoms) const;
    FiniteMeasure with_density(double dx, std::vector<double> values) const;

    double mass() const { return mass_; }
    double integrate(const std::function<double(double)>& psi) const;
    double integrate(const TestFunction& psi) const;
    // ∫_{[0,a]} psi dμ with partial-cell handling on the grid part.
    double integrate_up_to(double a, const std::function<double(double)>& psi) const;
    double cdf(double x) const;  // F(x) = μ[0, x]
    // Right-continuous inverse inf{x > 0 : F(x) >= y}; y in [0, mass].
    double inverse_cdf(double y) const;
    double support_sup() const;

    bool has_atoms() const { return !atoms_.empty(); }
    bool has_shifted() const { return shifted_ != nullptr; }
    bool has_density() const { return !grid_values_.empty(); }
    const std::vector<Atom>& atoms() const { return atoms_; }
    double grid_dx() const { return grid_dx_; }
    const std::vector<double>& grid_values() const { return grid_values_; }
    const ShiftedPart* shifted_part() const { return shifted_.get(); }

    // Materializes everything onto a common grid (atoms are kept separate).
    // Fails when the shifted part cannot land on the requested resolution.
    std::optional<std::vector<double>> grid_on(double dx, size_t n_nodes) const;

    nlohmann::json to_json() const;
    static FiniteMeasure from_json(const nlohmann::json& j);

private:
    void refresh_mass();

    std::vector<Atom> atoms_;
    double grid_dx_ = 0.0;
    std::vector<double> grid_values_;
    std::shared_ptr<const ShiftedPart> shifted_;
    double mass_ = 0.0;
};

struct MeasureDistances {
    double bl = 0.0;                 // bounded-Lipschitz dictionary maximum
    std::optional<double> tv;        // L1 distance (atoms + density), when computable
};

MeasureDistances distances(const FiniteMeasure& mu, const FiniteMeasure& rho);

// ∫ Gbar(x+t)/Gbar(x) μ(dx): the mass of μ transported for t time units under
// the lifetime law d.
double shifted_mass_term(const FiniteMeasure& mu, const Distribution& d, double t);

// ∫ g(x+t)/Gbar(x) μ(dx) via CDF-increment product integration on the grid part,
// so densities that blow up at zero are integrated without evaluating them.
double shifted_hazard_term(const FiniteMeasure& mu, const Distribution& d, double t);

// Same integrals restricted to μ-locations x <= a (used by the reneging functional).
double shifted_hazard_term_up_to(const FiniteMeasure& mu, const Distribution& d, double t, double a);

}  // namespace fluidq

#endif
