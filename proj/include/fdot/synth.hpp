#pragma once

#include "fdot/config.hpp"
#include "fdot/grid.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fdot {

/// Ground-truth dynamic absorption coefficient.
struct ExactSourceSpec {
    enum class Tag { example1, example2, custom };
    Tag tag = Tag::example2;
    SpaceTimeFn custom;

    static ExactSourceSpec example1() { return {Tag::example1, {}}; }
    static ExactSourceSpec example2() { return {Tag::example2, {}}; }
    static ExactSourceSpec from_function(SpaceTimeFn f) { return {Tag::custom, std::move(f)}; }
    static ExactSourceSpec from_name(const std::string& name);
};

/// Radial profile of Example 2: 15 (cos r - sqrt(3)/2) + 2 inside r <= pi/6, 2 outside.
double example2_profile(double r);
double exact_mu_f(const ExactSourceSpec& spec, double x, double y, double t);

/// Boundary input of the excitation process, B u_e = -20 t x (x - 1).
double excitation_input(double x, double y, double t);

/// Piecewise-constant-in-time source sum_k p_k(x) chi_[t_{k-1}, t_k).
struct SourceVector {
    GridPtr grid;
    std::vector<double> mesh;               ///< t_0 = 0 < t_1 < ... < t_K = T
    std::vector<std::vector<double>> p;     ///< K components, one value per grid node

    int K() const { return static_cast<int>(p.size()); }
    static SourceVector zeros(GridPtr grid, std::vector<double> mesh);
    void validate() const;

    SourceVector& operator+=(const SourceVector& o);
    SourceVector& operator-=(const SourceVector& o);
    SourceVector& operator*=(double s);
    friend SourceVector operator+(SourceVector a, const SourceVector& b) { return a += b; }
    friend SourceVector operator-(SourceVector a, const SourceVector& b) { return a -= b; }
    friend SourceVector operator*(double s, SourceVector a) { return a *= s; }

    /// Index k (0-based) of the interval containing t; t = T maps to the last interval.
    int interval(double t) const;
    /// Sum over k of the spatial L2 norms of p_k (trapezoid rule).
    double l1_l2_norm() const;
};

std::vector<double> uniform_time_mesh(double final_time, int K);

/// Source callback for the backward-Euler solver: each step uses the component active at its midpoint.
SourceFn source_from_semidiscrete(const SourceVector& p);

/// p_k(x) = mu_f(x, t_{k-1}) u_e(x, t_{k-1}); u_e is interpolated linearly in time between levels.
SourceVector project_semidiscrete(const SpaceTimeFn& mu_f, const FieldSeries& u_e, const std::vector<double>& mesh);

/// mu_f(., t_k) = p_{k+1} / u_e(., t_k) for k = 0..K-1. Nodes with |u_e| < eps_floor are NaN (masked).
FieldSeries recover_mu_from_p(const SourceVector& p, const FieldSeries& u_e, double eps_floor);
/// Default floor: 1e-3 * max |u_e|.
double default_eps_floor(const FieldSeries& u_e);

/// u_e on `grid` for the excitation input g = -20 t x (x - 1).
FieldSeries solve_excitation(const Coefficients& coeffs, const GridPtr& grid);
/// u_m on `grid` driven by mu_f * u_e.
FieldSeries solve_emission(const Coefficients& coeffs, const GridPtr& grid, const SpaceTimeFn& mu_f,
                           const FieldSeries& u_e);

/// Noise-free measurement du_m/dn on the measurement set of `grid`.
BoundaryTrace generate_measurement(const Coefficients& coeffs, const GridPtr& grid, const ExactSourceSpec& spec);
/// Same, enforcing that `data_grid` is at least twice as fine as `inversion_grid` in every direction.
BoundaryTrace generate_measurement(const Coefficients& coeffs, const GridPtr& data_grid,
                                   const SpaceTimeGrid& inversion_grid, const ExactSourceSpec& spec);

/// trace + delta (2 U - 1), U iid uniform on [0, 1].
BoundaryTrace add_noise(const BoundaryTrace& trace, double delta, RngStream& rng);

/// One row of the measurement CSV.
struct MeasurementSample {
    double t, x, y;
    double nx, ny;  ///< outward normal
    double value, noisy_value;
};

std::vector<MeasurementSample> to_samples(const BoundaryTrace& clean, const BoundaryTrace& noisy);
/// CSV columns t, x, y, value, noisy_value.
void write_measurement_csv(const std::vector<MeasurementSample>& samples, const std::filesystem::path& path);
/// Normals are reconstructed from the sample position against the domain edges.
std::vector<MeasurementSample> read_measurement_csv(const std::filesystem::path& path, const Domain& domain);

}  // namespace fdot
