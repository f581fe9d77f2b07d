#pragma once

#include "fdot/config.hpp"
#include "fdot/grid.hpp"
#include "fdot/mlp.hpp"
#include "fdot/synth.hpp"
#include "fdot/train.hpp"

#include <functional>
#include <vector>

namespace fdot {

/// Uniform lattice over the rectangle times [0, T], time-major then y then x.
struct TestMesh {
    Domain domain;
    double final_time = 1.0;
    int nx = 50, ny = 50, nt = 50;

    static TestMesh from(const ExperimentConfig& cfg) { return {cfg.domain, cfg.final_time, 50, 50, 50}; }

    int size() const { return nx * ny * nt; }
    int slice_size() const { return nx * ny; }
    double x(int i) const { return domain.x_min + domain.length_x() * i / (nx - 1); }
    double y(int j) const { return domain.y_min + domain.length_y() * j / (ny - 1); }
    double t(int k) const { return final_time * k / (nt - 1); }
    std::vector<double> times() const;
    JetTape::Points points() const;
    /// Trapezoid weight in time of every node, for aggregating slice errors.
    Eigen::VectorXd time_weights() const;
};

Eigen::VectorXd sample(const TestMesh& mesh, const SpaceTimeFn& f);
Eigen::VectorXd sample(const TestMesh& mesh, const Mlp& net);

/// Entry mask: nonzero = use. Nodes with non-finite approx or exact are excluded as well.
using Mask = std::vector<char>;

/// sqrt(sum w (a - e)^2 / sum w e^2) over unmasked nodes; unit weights when `weights` is empty.
double relative_l2(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact, const Mask& mask = {},
                   const Eigen::VectorXd& weights = {});

/// One record per time slice: t, error, num (sum of squared differences) and den (sum of squared exact values).
std::vector<Record> timeseries_error(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact, const TestMesh& mesh,
                                     const Mask& mask = {});
/// Relative error recombined from the slices with trapezoid weights in time.
double aggregate_slices(const std::vector<Record>& slices, const TestMesh& mesh);

/// Trilinear interpolation of a grid field.
double interpolate(const FieldSeries& field, double x, double y, double t);

/// Relative L2 error of a source network against the exact coefficient on the mesh.
double mu_f_error(const Mlp& net_f, const ExactSourceSpec& spec, const TestMesh& mesh);

/// Noisy measurement for the config: fine-grid solves, noise from stream (rng_seed, "noise").
std::vector<MeasurementSample> synthesize_data(const ExperimentConfig& cfg);

struct SweepCell {
    double lambda;
    std::uint64_t seed;
    double error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<Record> summary;  ///< lambda, mean, std, seeds

    std::vector<Record> per_seed_rows() const;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& v);

/// Runs one inversion per (lambda, seed) cell: data and initialization use the cell's seed,
/// the excitation network is shared.
SweepResult lambda_sweep(const ExperimentConfig& cfg, const std::vector<double>& lambdas,
                         const std::vector<std::uint64_t>& seeds, const Mlp& ue_star, std::ostream* progress = nullptr);

/// Aggregates precomputed cells (used by the sweep and by callers that cache runs).
SweepResult summarize(std::vector<SweepCell> cells);

}  // namespace fdot
