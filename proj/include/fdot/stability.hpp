#pragma once

#include "fdot/config.hpp"
#include "fdot/grid.hpp"
#include "fdot/synth.hpp"

#include <cmath>
#include <vector>

namespace fdot {

/// Interval integrals Phi_k(x) = int_{t_{k-1}}^{t_k} phi(x, t) dt by the trapezoid rule over grid
/// levels. Every mesh time must coincide with a grid level.
std::vector<std::vector<double>> interval_integrals(const FieldSeries& phi, const std::vector<double>& mesh);

/// sum_k int_{t_{k-1}}^{t_k} int_Omega p_k phi[omega] dx dt with phi from the adjoint solve.
double bilinear_functional(const SourceVector& p, const BoundaryTrace& omega, const Coefficients& coeffs);

/// Finite family of boundary test functions with their adjoint interval integrals precomputed.
class OmegaBasis {
public:
    enum class Family { trigonometric, smoothed_random };

    struct Element {
        Family family;
        BoundaryTrace omega;
        double norm;                                 ///< L2 norm on the measurement set x (0, T)
        std::vector<std::vector<double>> integrals;  ///< Phi_k of the adjoint state
    };

    /// Up to 32 trigonometric traces cos(a pi x) cos(b pi y) cos(c pi t / T), then smoothed random
    /// traces drawn from `rng`, M in total.
    static OmegaBasis build(const GridPtr& grid, const Coefficients& coeffs, const std::vector<double>& mesh, int M,
                            const RngStream& rng);
    /// Basis made of the given traces (all must be nonzero).
    static OmegaBasis from_traces(const std::vector<BoundaryTrace>& traces, const Coefficients& coeffs,
                                  const std::vector<double>& mesh);

    int size() const { return static_cast<int>(elements_.size()); }
    const Element& operator[](int j) const { return elements_[j]; }
    const std::vector<double>& mesh() const { return mesh_; }
    const GridPtr& grid() const { return grid_; }
    /// The first m elements.
    OmegaBasis prefix(int m) const;

    /// Bilinear functional of p against element j, using the stored integrals.
    double pair(const SourceVector& p, int j) const;

private:
    GridPtr grid_;
    std::vector<double> mesh_;
    std::vector<Element> elements_;
};

/// Smoothed random trace (normal draws smoothed along the measurement nodes and in time).
BoundaryTrace smoothed_random_trace(const GridPtr& grid, RngStream& rng);
/// Smooth random source: a few random Fourier modes per component.
SourceVector random_source(const GridPtr& grid, const std::vector<double>& mesh, RngStream& rng);
/// random_source with each component shifted to be strictly positive.
SourceVector random_positive_source(const GridPtr& grid, const std::vector<double>& mesh, RngStream& rng);
/// Random combination of the trigonometric traces plus an offset that keeps it strictly positive.
/// Positive pairs keep both sides of the identity away from cancellation, so the relative
/// mismatch measures discretization error rather than round-off in a near-zero difference.
BoundaryTrace random_positive_trace(const GridPtr& grid, RngStream& rng);

/// max_j |L(p, omega_j)| / ||omega_j||: a lower bound of the weighted norm.
double weighted_norm_estimate(const SourceVector& p, const OmegaBasis& basis);

/// Normal flux of the emission state driven by the semi-discrete source (zero Robin and initial data).
BoundaryTrace emission_flux(const SourceVector& p, const Coefficients& coeffs);

struct StabilityRecord {
    double lhs = 0, rhs = 0;
    bool satisfied = false;
    double ratio() const { return rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0.0); }
};

constexpr double kStabilityTolerance = 0.05;

/// lhs = weighted_norm_estimate(p - q); rhs = ||flux(p) - flux(q)|| from two emission solves.
StabilityRecord stability_check(const SourceVector& p, const SourceVector& q, const OmegaBasis& basis,
                                const Coefficients& coeffs);

/// Both sides of the variational identity for one (p, omega) pair.
struct IdentityRecord {
    double lhs = 0;          ///< L(p, omega)
    double plain = 0;        ///< <omega, dU/dn> over the measurement set
    double weighted = 0;     ///< -(kappa / beta) <omega, dU/dn>
    double plain_mismatch = 0;
    double weighted_mismatch = 0;
};

/// |a - b| / max(|a|, |b|); 0 when both vanish.
double relative_mismatch(double a, double b);

IdentityRecord identity_check(const SourceVector& p, const BoundaryTrace& omega, const Coefficients& coeffs);

struct NormAxiomReport {
    int trials = 0;
    bool nonnegative = true;
    double zero_value = 0;
    double homogeneity_error = 0;     ///< max relative error of estimate(c p) vs |c| estimate(p)
    int triangle_violations = 0;
    double constant = 0;              ///< C with estimate(p) <= C sum_k ||p_k||
    int bound_violations = 0;
};

/// Empirical checks of the norm properties on random sources drawn from `rng`.
NormAxiomReport norm_axiom_suite(const OmegaBasis& basis, int trials, RngStream& rng);

/// max over elements and intervals of ||Phi_k||_{L2(Omega)} / ||omega||.
double operator_norm_constant(const OmegaBasis& basis);

}  // namespace fdot
