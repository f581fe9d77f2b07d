#pragma once

#include "fdot/config.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdot {

/// Raised when the implicit step solve fails or produces non-finite values.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Vec2 {
    double x = 0, y = 0;
};

/// Uniform tensor grid over the rectangle times [0, T].
///
/// Nodes are numbered `j * nx + i`. Boundary nodes carry the outward normal of their edge;
/// corner nodes get the averaged diagonal normal and are never part of the measurement set.
class SpaceTimeGrid {
public:
    SpaceTimeGrid(const Domain& domain, double final_time, int nx, int ny, int nt, const GammaSpec& gamma);

    const Domain& domain() const { return domain_; }
    double final_time() const { return final_time_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nt() const { return nt_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double ht() const { return ht_; }
    int nodes() const { return nx_ * ny_; }

    int node(int i, int j) const { return j * nx_ + i; }
    int ix(int node) const { return node % nx_; }
    int iy(int node) const { return node / nx_; }
    double x(int node) const { return domain_.x_min + ix(node) * hx_; }
    double y(int node) const { return domain_.y_min + iy(node) * hy_; }
    double t(int level) const { return level == nt_ - 1 ? final_time_ : level * ht_; }
    std::vector<double> times() const;

    /// Trapezoid quadrature weight of a node for integrals over the rectangle.
    double area_weight(int node) const;

    const std::vector<int>& boundary() const { return boundary_; }
    /// Index into boundary() or -1 for interior nodes.
    int boundary_index(int node) const { return boundary_index_[node]; }
    const std::vector<Vec2>& boundary_normal() const { return boundary_normal_; }

    const GammaSpec& gamma_spec() const { return gamma_spec_; }
    const std::vector<int>& gamma() const { return gamma_; }
    const std::vector<Vec2>& gamma_normal() const { return gamma_normal_; }
    /// Boundary quadrature weight of each measurement node: h, plus h/2 next to an (excluded) corner.
    const std::vector<double>& gamma_weight() const { return gamma_weight_; }
    /// Index into gamma() or -1.
    int gamma_index(int node) const { return gamma_index_[node]; }

    bool same_shape(const SpaceTimeGrid& other) const;

private:
    Domain domain_;
    double final_time_;
    int nx_, ny_, nt_;
    double hx_, hy_, ht_;
    GammaSpec gamma_spec_;
    std::vector<int> boundary_;
    std::vector<int> boundary_index_;
    std::vector<Vec2> boundary_normal_;
    std::vector<int> gamma_;
    std::vector<int> gamma_index_;
    std::vector<Vec2> gamma_normal_;
    std::vector<double> gamma_weight_;
};

using GridPtr = std::shared_ptr<const SpaceTimeGrid>;

GridPtr make_grid(const Domain& domain, double final_time, int nx, int ny, int nt,
                  const GammaSpec& gamma = GammaSpec::full());
/// Inversion/stability grid from the config's resolution.
GridPtr make_grid(const ExperimentConfig& cfg);
/// Measurement grid, refined by `cfg.data_refinement` in every direction.
GridPtr make_data_grid(const ExperimentConfig& cfg);

/// Values of a scalar field at a sequence of time levels, stored level-major.
class FieldSeries {
public:
    FieldSeries() = default;
    /// One level per grid time level, zero-initialized.
    explicit FieldSeries(GridPtr grid);
    /// Arbitrary level times (e.g. a coarse time mesh).
    FieldSeries(GridPtr grid, std::vector<double> times);

    const GridPtr& grid() const { return grid_; }
    int levels() const { return static_cast<int>(times_.size()); }
    int nodes() const { return nodes_; }
    const std::vector<double>& times() const { return times_; }

    std::span<double> level(int n) { return {data_.data() + static_cast<std::size_t>(n) * nodes_, static_cast<std::size_t>(nodes_)}; }
    std::span<const double> level(int n) const {
        return {data_.data() + static_cast<std::size_t>(n) * nodes_, static_cast<std::size_t>(nodes_)};
    }
    double& at(int n, int node) { return data_[static_cast<std::size_t>(n) * nodes_ + node]; }
    double at(int n, int node) const { return data_[static_cast<std::size_t>(n) * nodes_ + node]; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    GridPtr grid_;
    std::vector<double> times_;
    int nodes_ = 0;
    std::vector<double> data_;
};

/// Values on the measurement nodes (grid.gamma()) at every grid time level.
class BoundaryTrace {
public:
    BoundaryTrace() = default;
    explicit BoundaryTrace(GridPtr grid);

    const GridPtr& grid() const { return grid_; }
    int levels() const { return levels_; }
    int nodes() const { return nodes_; }

    std::span<double> level(int n) { return {data_.data() + static_cast<std::size_t>(n) * nodes_, static_cast<std::size_t>(nodes_)}; }
    std::span<const double> level(int n) const {
        return {data_.data() + static_cast<std::size_t>(n) * nodes_, static_cast<std::size_t>(nodes_)};
    }
    double& at(int n, int k) { return data_[static_cast<std::size_t>(n) * nodes_ + k]; }
    double at(int n, int k) const { return data_[static_cast<std::size_t>(n) * nodes_ + k]; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    GridPtr grid_;
    int levels_ = 0;
    int nodes_ = 0;
    std::vector<double> data_;
};

/// Fills the interior source for the step from level `step` to `step + 1` (times t0 -> t1).
using SourceFn = std::function<void(int step, double t0, double t1, std::span<double> out)>;
/// Fills Robin data g for every node of grid.boundary() for the same step.
using RobinFn = std::function<void(int step, double t0, double t1, std::span<double> out)>;
using SpaceFn = std::function<double(double x, double y)>;
using SpaceTimeFn = std::function<double(double x, double y, double t)>;

/// (c^{-1} d/dt + A) u = S in the rectangle, du/dn + beta u = g on the boundary, u(., 0) = u0,
/// with A u = -div(kappa grad u) + mu_a u.
struct ParabolicProblem {
    Coefficients coeffs;
    SpaceFn kappa;  ///< optional; defaults to coeffs.kappa
    SpaceFn mu_a;   ///< optional; defaults to coeffs.mu_a
    SourceFn source;
    RobinFn robin;
    std::vector<double> initial;  ///< empty means zero

    void validate(const SpaceTimeGrid& grid) const;
};

SourceFn source_from_function(const SpaceTimeGrid& grid, SpaceTimeFn f);
/// Uses the series value at the new level of each step.
SourceFn source_from_series(const FieldSeries& series);
RobinFn robin_from_function(const SpaceTimeGrid& grid, SpaceTimeFn g);
/// Robin data equal to the trace on measurement nodes and zero elsewhere, taken at the new level.
/// A corner gets half the sum of its measurement neighbours (each edge owns half the corner cell).
RobinFn robin_from_trace(const BoundaryTrace& trace);

/// One backward-Euler step operator. The system is scaled by the trapezoid node weights,
/// which makes it symmetric positive definite.
class StepOperator {
public:
    StepOperator(const SpaceTimeGrid& grid, const ParabolicProblem& problem);

    const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
    /// Weighted right-hand side for `M u_new = W (u_old/(c ht) + S) + boundary(g)`.
    void rhs(std::span<const double> u_old, std::span<const double> source, std::span<const double> robin,
             Eigen::VectorXd& out) const;
    /// Conjugate gradient solve to relative residual 1e-10, warm-started from `guess`.
    void solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const;

    static constexpr double tolerance = 1e-10;

private:
    const SpaceTimeGrid& grid_;
    double inv_c_ht_;
    Eigen::SparseMatrix<double> matrix_;
    Eigen::VectorXd weight_;
    Eigen::VectorXd robin_gain_;  // boundary-ordered multiplier on g
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg_;
};

FieldSeries solve_forward(const ParabolicProblem& problem, const GridPtr& grid);

/// Solves (-c^{-1} d/dt + A) phi = 0, phi(., T) = 0, B phi = omega on the measurement set and
/// B phi = 0 elsewhere (corners as in robin_from_trace), by running the forward solver in reversed time.
FieldSeries solve_adjoint(const BoundaryTrace& omega, const GridPtr& grid, const Coefficients& coeffs);

/// Outward normal derivative on the measurement nodes (one-sided second-order stencil).
BoundaryTrace boundary_flux(const FieldSeries& field);

/// Trapezoid approximation of the space-time integral of a*b.
double inner_product_space_time(const FieldSeries& a, const FieldSeries& b);
double inner_product_space_time(const BoundaryTrace& a, const BoundaryTrace& b);
double l2_norm(const BoundaryTrace& a);

/// Trapezoid weights for an arbitrary increasing sequence of times.
std::vector<double> trapezoid_weights(const std::vector<double>& times);

/// CSV columns t, x, y, value.
void write_csv(const FieldSeries& field, const std::filesystem::path& path);
void write_csv(const BoundaryTrace& trace, const std::filesystem::path& path);

}  // namespace fdot
