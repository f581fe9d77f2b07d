#pragma once

#include "fdot/config.hpp"
#include "fdot/mlp.hpp"
#include "fdot/synth.hpp"

#include <array>
#include <vector>

namespace fdot {

/// Points (x, y, t) with Monte-Carlo quadrature weights |D| / N.
struct PointSet {
    JetTape::Points points;
    Eigen::VectorXd weight;

    int size() const { return static_cast<int>(points.cols()); }
    void resize(int n) {
        points.resize(3, n);
        weight.resize(n);
    }
};

/// Boundary points carry the outward normal of the edge they were drawn from.
struct BoundaryPointSet : PointSet {
    Eigen::Matrix2Xd normal;
};

/// Measurement points on the measurement set with the noisy flux attached.
struct DataPointSet : BoundaryPointSet {
    Eigen::VectorXd phi;
};

struct CollocationSet {
    PointSet interior;          ///< Omega x (0, T)
    BoundaryPointSet spatial;   ///< boundary x (0, T)
    PointSet temporal;          ///< Omega x {0}
    DataPointSet data;          ///< measurement set x (0, T]
};

/// Number of spatial-boundary samples per edge (left, right, bottom, top): proportional to edge
/// length, remainders given to the largest fractional parts. Sums to `total`.
std::array<int, 4> split_by_edge_length(const Domain& domain, int total);

/// Fresh uniform i.i.d. samples for one epoch, drawn from `rng.substream("epoch/<epoch>")`.
/// Data points are drawn with replacement from the samples with t > 0 whose position lies on the
/// measurement set; they are skipped when `counts.n_d == 0` or `data` is empty.
CollocationSet sample_collocation(const ExperimentConfig& cfg, const CollocationCounts& counts, const RngStream& rng,
                                  int epoch, const std::vector<MeasurementSample>& data = {});

/// Monte-Carlo estimate sum_i w_i f(x_i, y_i, t_i).
double mc_integrate(const PointSet& set, const SpaceTimeFn& f);

/// Per-residual weighted sums of squares. `d` is stored without the lambda factor.
struct LossBreakdown {
    double interior = 0;
    std::array<double, 4> sb{};  ///< B u, d/dn B u, d/dt B u, d/dt d/dn B u
    double tb0 = 0, tb1 = 0;     ///< u(., 0) and d/dt u(., 0)
    double d = 0;
    double lambda = 0;

    double total() const { return lambda * d + interior + sb[0] + sb[1] + sb[2] + sb[3] + tb0 + tb1; }
};

/// Single evaluation point for the pointwise residual functions.
struct CollocationPoint {
    double x = 0, y = 0, t = 0;
    double nx = 0, ny = 0;  ///< outward normal (boundary and data kinds)
    double phi = 0;         ///< measured flux (data kind)
};

enum class ExcitationResidual { interior, spatial, temporal };
enum class EmissionResidual { interior, sb0, sb1, sb2, sb3, tb0, tb1, data };

/// Coefficients a_c of the boundary residual D_j(B u) = sum_c a_c u_c, j = 0..3, where the X slot
/// holds derivatives along the outward normal: B u = u_n + beta u, d/dn B u = u_nn + beta u_n,
/// d/dt B u = u_nt + beta u_t, d/dt d/dn B u = u_nnt + beta u_nt.
std::array<double, 10> boundary_operator(int derivative, double beta);

/// Boundary residual j as a pair of jet stencils: r = sum_c a_c u_c(d1) + sum_c b_c u_c(d2), where the
/// X slot of each jet differentiates along d1 or d2. In normal mode d1 = n and b = 0. In tangential mode
/// d1,2 = (n +- tau) / sqrt 2 with tau = (-n_y, n_x), so that u_ntau = (u_d1d1 - u_d2d2) / 2 and
/// u_tau = (u_d1 - u_d2) / sqrt 2; sb1 and sb3 then differentiate B u along the edge.
struct BoundaryStencil {
    std::array<double, 10> a{}, b{};
};
BoundaryStencil boundary_stencil(int derivative, double beta, BoundaryDerivative mode);

/// Layout of normal-direction boundary jets.
JetLayout normal_layout();

double residual_excitation(const Mlp& net_e, const Coefficients& coeffs, const CollocationPoint& p,
                           ExcitationResidual kind);
double residual_emission(const Mlp& net_m, const Mlp& net_f, const Mlp& ue_star, const Coefficients& coeffs,
                         const CollocationPoint& p, EmissionResidual kind,
                         BoundaryDerivative mode = BoundaryDerivative::normal);

/// J1: interior, spatial boundary (against the excitation input) and initial residuals.
/// When `grad` is given it receives dJ1/d(theta_e).
LossBreakdown empirical_loss_j1(const Mlp& net_e, const CollocationSet& set, const Coefficients& coeffs,
                                std::vector<double>* grad = nullptr);

/// J2 with all eight terms. Gradients with respect to the source and emission networks are written
/// when requested; `ue_star` is frozen.
LossBreakdown empirical_loss_j2(const Mlp& net_f, const Mlp& net_m, const Mlp& ue_star, const CollocationSet& set,
                                const Coefficients& coeffs, double lambda, std::vector<double>* grad_f = nullptr,
                                std::vector<double>* grad_m = nullptr,
                                BoundaryDerivative mode = BoundaryDerivative::normal);

/// Square roots of each weighted sum, plus the total loss.
Record training_errors(const LossBreakdown& b);

}  // namespace fdot
