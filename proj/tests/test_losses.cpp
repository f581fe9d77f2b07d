#include "fdot/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace fdot;

namespace {

Mlp random_net(std::uint64_t seed, std::vector<int> widths = {3, 8, 8, 1}) {
    RngStream rng(seed, "net");
    Mlp net = init_mlp(widths, rng);
    for (double& p : net.params()) p += 0.2 * rng.normal();
    return net;
}

// u = a . (x, y, t) + b with no hidden layer.
Mlp affine_net(double ax, double ay, double at, double b) {
    Mlp net({3, 1});
    net.weight(1) << ax, ay, at;
    net.bias(1)(0) = b;
    return net;
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.collocation = {40, 48, 20, 30};
    return cfg;
}

std::vector<MeasurementSample> fake_data(int n, RngStream& rng) {
    std::vector<MeasurementSample> out;
    for (int i = 0; i < n; ++i) {
        const int edge = static_cast<int>(rng.index(4));
        const double s = rng.uniform(), t = i % 7 == 0 ? 0.0 : rng.uniform();
        MeasurementSample m{};
        m.t = t;
        switch (edge) {
        case 0: m.x = 0, m.y = s, m.nx = -1, m.ny = 0; break;
        case 1: m.x = 1, m.y = s, m.nx = 1, m.ny = 0; break;
        case 2: m.x = s, m.y = 0, m.nx = 0, m.ny = -1; break;
        default: m.x = s, m.y = 1, m.nx = 0, m.ny = 1; break;
        }
        m.value = rng.normal();
        m.noisy_value = m.value + 0.01 * rng.normal();
        out.push_back(m);
    }
    return out;
}

// Finite-difference reference built only from network values.
struct FdNet {
    const Mlp& net;
    double h = 1e-3;
    double u(double x, double y, double t) const { return evaluate(net, x, y, t); }
    double ut(double x, double y, double t) const { return (u(x, y, t + h) - u(x, y, t - h)) / (2 * h); }
    double lap(double x, double y, double t) const {
        return (u(x + h, y, t) + u(x - h, y, t) + u(x, y + h, t) + u(x, y - h, t) - 4 * u(x, y, t)) / (h * h);
    }
    double un(double x, double y, double t, double nx, double ny) const {
        return (u(x + h * nx, y + h * ny, t) - u(x - h * nx, y - h * ny, t)) / (2 * h);
    }
    double unn(double x, double y, double t, double nx, double ny) const {
        return (u(x + h * nx, y + h * ny, t) - 2 * u(x, y, t) + u(x - h * nx, y - h * ny, t)) / (h * h);
    }
    double unt(double x, double y, double t, double nx, double ny) const {
        return (un(x, y, t + h, nx, ny) - un(x, y, t - h, nx, ny)) / (2 * h);
    }
    double unnt(double x, double y, double t, double nx, double ny) const {
        return (unn(x, y, t + h, nx, ny) - unn(x, y, t - h, nx, ny)) / (2 * h);
    }
    // Mixed second derivative along (ax, ay) and (bx, by).
    double uab(double x, double y, double t, double ax, double ay, double bx, double by) const {
        return (u(x + h * (ax + bx), y + h * (ay + by), t) - u(x + h * (ax - bx), y + h * (ay - by), t) -
                u(x - h * (ax - bx), y - h * (ay - by), t) + u(x - h * (ax + bx), y - h * (ay + by), t)) /
               (4 * h * h);
    }
    double uabt(double x, double y, double t, double ax, double ay, double bx, double by) const {
        return (uab(x, y, t + h, ax, ay, bx, by) - uab(x, y, t - h, ax, ay, bx, by)) / (2 * h);
    }
};

LossBreakdown reference_j2(const Mlp& f, const Mlp& m, const Mlp& ue, const CollocationSet& s, const Coefficients& k,
                           double lambda, BoundaryDerivative mode = BoundaryDerivative::normal) {
    const FdNet um{m};
    LossBreakdown b;
    b.lambda = lambda;
    for (int j = 0; j < s.interior.size(); ++j) {
        const double x = s.interior.points(0, j), y = s.interior.points(1, j), t = s.interior.points(2, j);
        const double r = um.ut(x, y, t) / k.c - k.kappa * um.lap(x, y, t) + k.mu_a * um.u(x, y, t) -
                         evaluate(f, x, y, t) * evaluate(ue, x, y, t);
        b.interior += s.interior.weight(j) * r * r;
    }
    for (int j = 0; j < s.spatial.size(); ++j) {
        const double x = s.spatial.points(0, j), y = s.spatial.points(1, j), t = s.spatial.points(2, j);
        const double nx = s.spatial.normal(0, j), ny = s.spatial.normal(1, j), w = s.spatial.weight(j);
        const double r0 = um.un(x, y, t, nx, ny) + k.beta * um.u(x, y, t);
        const double tx = -ny, ty = nx;
        double r1 = um.unn(x, y, t, nx, ny) + k.beta * um.un(x, y, t, nx, ny);
        const double r2 = um.unt(x, y, t, nx, ny) + k.beta * um.ut(x, y, t);
        double r3 = um.unnt(x, y, t, nx, ny) + k.beta * um.unt(x, y, t, nx, ny);
        if (mode == BoundaryDerivative::tangential) {
            r1 = um.uab(x, y, t, nx, ny, tx, ty) + k.beta * um.un(x, y, t, tx, ty);
            r3 = um.uabt(x, y, t, nx, ny, tx, ty) + k.beta * um.unt(x, y, t, tx, ty);
        }
        b.sb[0] += w * r0 * r0;
        b.sb[1] += w * r1 * r1;
        b.sb[2] += w * r2 * r2;
        b.sb[3] += w * r3 * r3;
    }
    for (int j = 0; j < s.temporal.size(); ++j) {
        const double x = s.temporal.points(0, j), y = s.temporal.points(1, j);
        b.tb0 += s.temporal.weight(j) * std::pow(um.u(x, y, 0), 2);
        b.tb1 += s.temporal.weight(j) * std::pow(um.ut(x, y, 0), 2);
    }
    for (int j = 0; j < s.data.size(); ++j) {
        const double x = s.data.points(0, j), y = s.data.points(1, j), t = s.data.points(2, j);
        const double r = um.un(x, y, t, s.data.normal(0, j), s.data.normal(1, j)) - s.data.phi(j);
        b.d += s.data.weight(j) * r * r;
    }
    return b;
}

void expect_close(const LossBreakdown& a, const LossBreakdown& b, double rel) {
    auto near = [rel](double x, double y, const char* what) {
        EXPECT_NEAR(x, y, rel * std::max(std::abs(y), 1e-8)) << what;
    };
    near(a.interior, b.interior, "interior");
    for (int k = 0; k < 4; ++k) near(a.sb[k], b.sb[k], ("sb" + std::to_string(k)).c_str());
    near(a.tb0, b.tb0, "tb0");
    near(a.tb1, b.tb1, "tb1");
    near(a.d, b.d, "d");
}

}  // namespace

TEST(SplitByEdgeLength, ProportionalWithLargestRemainders) {
    EXPECT_EQ(split_by_edge_length(Domain{}, 2000), (std::array<int, 4>{500, 500, 500, 500}));
    // lengths 1, 1, 2, 2 for (left, right, bottom, top): shares 1.67, 1.67, 3.33, 3.33
    EXPECT_EQ(split_by_edge_length(Domain{0, 2, 0, 1}, 10), (std::array<int, 4>{2, 2, 3, 3}));
    RngStream rng(3, "split");
    for (int i = 0; i < 100; ++i) {
        const int total = static_cast<int>(rng.index(5000));
        const Domain d{0, rng.uniform(0.1, 3), 0, rng.uniform(0.1, 3)};
        const auto n = split_by_edge_length(d, total);
        EXPECT_EQ(n[0] + n[1] + n[2] + n[3], total);
    }
}

TEST(SampleCollocation, WeightsAndPlacement) {
    ExperimentConfig cfg;
    RngStream rng(1, "collocation/inverse");
    RngStream drng(2, "data");
    const auto data = fake_data(200, drng);
    const auto s = sample_collocation(cfg, cfg.collocation, rng, 0, data);
    ASSERT_EQ(s.interior.size(), 500);
    ASSERT_EQ(s.spatial.size(), 2000);
    ASSERT_EQ(s.temporal.size(), 500);
    ASSERT_EQ(s.data.size(), 500);
    EXPECT_DOUBLE_EQ(s.interior.weight(0), 1.0 / 500);
    EXPECT_NEAR(s.interior.weight.sum(), 1.0, 1e-12);
    EXPECT_NEAR(s.spatial.weight.sum(), 4.0, 1e-12);
    EXPECT_NEAR(s.temporal.weight.sum(), 1.0, 1e-12);
    EXPECT_NEAR(s.data.weight.sum(), 4.0, 1e-12);
    for (int j = 0; j < s.interior.size(); ++j)
        for (int c = 0; c < 3; ++c) {
            EXPECT_GE(s.interior.points(c, j), 0.0);
            EXPECT_LE(s.interior.points(c, j), 1.0);
        }
    for (int j = 0; j < s.spatial.size(); ++j) {
        const double x = s.spatial.points(0, j), y = s.spatial.points(1, j);
        const double nx = s.spatial.normal(0, j), ny = s.spatial.normal(1, j);
        if (nx != 0) {
            EXPECT_EQ(x, nx < 0 ? 0.0 : 1.0);
        }
        if (ny != 0) {
            EXPECT_EQ(y, ny < 0 ? 0.0 : 1.0);
        }
        EXPECT_EQ(std::abs(nx) + std::abs(ny), 1.0);
    }
    for (int j = 0; j < s.temporal.size(); ++j) EXPECT_EQ(s.temporal.points(2, j), 0.0);
    for (int j = 0; j < s.data.size(); ++j) EXPECT_GT(s.data.points(2, j), 0.0);
}

TEST(SampleCollocation, DeterministicPerEpoch) {
    ExperimentConfig cfg;
    RngStream rng(9, "collocation/excitation");
    const auto a = sample_collocation(cfg, cfg.collocation, rng, 3);
    const auto b = sample_collocation(cfg, cfg.collocation, rng, 3);
    const auto c = sample_collocation(cfg, cfg.collocation, rng, 4);
    EXPECT_EQ(a.interior.points, b.interior.points);
    EXPECT_EQ(a.spatial.points, b.spatial.points);
    EXPECT_NE(a.interior.points, c.interior.points);
    EXPECT_EQ(a.data.size(), 0);
}

TEST(SampleCollocation, DataRespectMeasurementSet) {
    ExperimentConfig cfg;
    cfg.gamma_spec = {true, false, false, false};
    RngStream drng(2, "data");
    const auto data = fake_data(300, drng);
    const auto s = sample_collocation(cfg, cfg.collocation, RngStream(1, "c"), 0, data);
    for (int j = 0; j < s.data.size(); ++j) EXPECT_EQ(s.data.points(0, j), 0.0);
    EXPECT_NEAR(s.data.weight.sum(), 1.0, 1e-12);
    std::vector<MeasurementSample> only_right;
    for (const auto& m : data)
        if (m.nx == 1) only_right.push_back(m);
    EXPECT_THROW(sample_collocation(cfg, cfg.collocation, RngStream(1, "c"), 0, only_right), std::invalid_argument);
}

TEST(MonteCarlo, ErrorSlopeIsMinusOneHalf) {
    const auto f = [](double x, double y, double t) { return std::exp(x) * std::sin(y) + t * t; };
    const double exact = (std::exp(1.0) - 1) * (1 - std::cos(1.0)) + 1.0 / 3;
    ExperimentConfig cfg;
    std::vector<double> logn, logerr;
    for (int n : {100, 1000, 10000, 100000}) {
        double sq = 0;
        const int reps = 20;
        for (int r = 0; r < reps; ++r) {
            const auto s = sample_collocation(cfg, {n, 0, 0, 0}, RngStream(77, "mc"), r);
            sq += std::pow(mc_integrate(s.interior, f) - exact, 2);
        }
        logn.push_back(std::log(n));
        logerr.push_back(0.5 * std::log(sq / reps));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < logn.size(); ++i) mx += logn[i] / logn.size(), my += logerr[i] / logn.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < logn.size(); ++i) sxy += (logn[i] - mx) * (logerr[i] - my), sxx += std::pow(logn[i] - mx, 2);
    EXPECT_NEAR(sxy / sxx, -0.5, 0.15);
}

TEST(ResidualExcitation, ZeroNetAndAffineNet) {
    const Coefficients k{1.0, 1.0, 0.1, 1.0};
    const Mlp zero = affine_net(0, 0, 0, 0);
    const CollocationPoint left{0.0, 0.3, 0.7, -1, 0, 0};
    EXPECT_EQ(residual_excitation(zero, k, left, ExcitationResidual::interior), 0.0);
    EXPECT_EQ(residual_excitation(zero, k, left, ExcitationResidual::spatial), 0.0);  // input vanishes at x = 0
    EXPECT_EQ(residual_excitation(zero, k, left, ExcitationResidual::temporal), 0.0);

    const Mlp ux = affine_net(1, 0, 0, 0);
    const CollocationPoint inner{0.4, 0.3, 0.2};
    EXPECT_NEAR(residual_excitation(ux, k, inner, ExcitationResidual::interior), k.mu_a * 0.4, 1e-15);
    EXPECT_NEAR(residual_excitation(ux, k, left, ExcitationResidual::spatial), -1.0, 1e-15);
    // bottom edge: u_n = 0, beta u = x, input -20 t x (x - 1)
    const CollocationPoint bottom{0.25, 0.0, 0.5, 0, -1, 0};
    EXPECT_NEAR(residual_excitation(ux, k, bottom, ExcitationResidual::spatial), 0.25 + 20 * 0.5 * 0.25 * (0.25 - 1),
                1e-14);
}

TEST(ResidualEmission, ZeroAndUnitExamples) {
    const Coefficients k;
    const Mlp zero = affine_net(0, 0, 0, 0), one = affine_net(0, 0, 0, 1);
    const CollocationPoint p{0.0, 0.5, 0.5, -1, 0, 0};
    for (auto kind : {EmissionResidual::interior, EmissionResidual::sb0, EmissionResidual::sb1, EmissionResidual::sb2,
                      EmissionResidual::sb3, EmissionResidual::tb0, EmissionResidual::tb1, EmissionResidual::data})
        EXPECT_EQ(residual_emission(zero, zero, zero, k, p, kind), 0.0);
    EXPECT_EQ(residual_emission(zero, one, one, k, p, EmissionResidual::interior), -1.0);
}

TEST(ResidualEmission, BoundaryOperatorCoefficients) {
    EXPECT_THROW(boundary_operator(4, 1.0), std::invalid_argument);
    const auto a = boundary_operator(3, 2.5);
    EXPECT_EQ(a[XXT], 1.0);
    EXPECT_EQ(a[XT], 2.5);
    // u = 2x + 3t on the right edge: u_n = 2, u_nt = 0, u_t = 3
    const Mlp u = affine_net(2, 0, 3, 0);
    const Coefficients k{1, 1, 0.1, 2.5};
    const CollocationPoint p{1.0, 0.5, 0.4, 1, 0, 0.5};
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::sb0), 2 + 2.5 * (2 + 1.2), 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::sb1), 2.5 * 2, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::sb2), 2.5 * 3, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::sb3), 0.0, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::tb1), 3.0, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, p, EmissionResidual::data), 2 - 0.5, 1e-14);
}

TEST(EmpiricalLoss, ZeroInputsGiveZero) {
    const auto cfg = small_config();
    RngStream drng(2, "data");
    auto data = fake_data(50, drng);
    for (auto& m : data) m.value = m.noisy_value = 0;
    const auto s = sample_collocation(cfg, cfg.collocation, RngStream(1, "c"), 0, data);
    const Mlp zero = affine_net(0, 0, 0, 0);
    EXPECT_EQ(empirical_loss_j2(zero, zero, zero, s, cfg.coefficients, 100).total(), 0.0);
    auto no_input = s;
    no_input.spatial.resize(0);
    no_input.spatial.normal.resize(2, 0);
    EXPECT_EQ(empirical_loss_j1(zero, no_input, cfg.coefficients).total(), 0.0);
    EXPECT_THROW(empirical_loss_j2(zero, zero, zero, s, cfg.coefficients, -1), std::invalid_argument);
}

TEST(EmpiricalLoss, SinglePointIsWeightTimesSquaredResidual) {
    const Coefficients k;
    const Mlp e = random_net(1);
    CollocationSet s;
    s.interior.resize(1);
    s.interior.points << 0.3, 0.6, 0.2;
    s.interior.weight << 0.7;
    const double r = residual_excitation(e, k, {0.3, 0.6, 0.2}, ExcitationResidual::interior);
    EXPECT_NEAR(empirical_loss_j1(e, s, k).interior, 0.7 * r * r, 1e-14);
}

TEST(EmpiricalLoss, J2MatchesFiniteDifferenceReference) {
    const auto cfg = small_config();
    const Coefficients k{1.3, 0.8, 0.2, 1.7};
    RngStream drng(5, "data");
    const auto data = fake_data(80, drng);
    for (int trial = 0; trial < 3; ++trial) {
        const Mlp f = random_net(10 + trial), m = random_net(20 + trial), ue = random_net(30 + trial);
        const auto s = sample_collocation(cfg, cfg.collocation, RngStream(trial, "c"), trial, data);
        const auto got = empirical_loss_j2(f, m, ue, s, k, 3.0);
        expect_close(got, reference_j2(f, m, ue, s, k, 3.0), 1e-4);
        EXPECT_NEAR(got.total(),
                    3.0 * got.d + got.interior + got.sb[0] + got.sb[1] + got.sb[2] + got.sb[3] + got.tb0 + got.tb1,
                    1e-12 * got.total());
    }
}

TEST(EmpiricalLoss, TangentialModeMatchesFiniteDifferenceReference) {
    const auto cfg = small_config();
    const Coefficients k{1.3, 0.8, 0.2, 1.7};
    RngStream drng(5, "data");
    const auto data = fake_data(80, drng);
    const auto tang = BoundaryDerivative::tangential;
    for (int trial = 0; trial < 3; ++trial) {
        const Mlp f = random_net(10 + trial), m = random_net(20 + trial), ue = random_net(30 + trial);
        const auto s = sample_collocation(cfg, cfg.collocation, RngStream(trial, "c"), trial, data);
        const auto got = empirical_loss_j2(f, m, ue, s, k, 3.0, nullptr, nullptr, tang);
        expect_close(got, reference_j2(f, m, ue, s, k, 3.0, tang), 1e-4);
        // sb0 and sb2 do not depend on the mode.
        const auto normal = empirical_loss_j2(f, m, ue, s, k, 3.0);
        EXPECT_NEAR(got.sb[0], normal.sb[0], 1e-12 * normal.sb[0]);
        EXPECT_NEAR(got.sb[2], normal.sb[2], 1e-12 * normal.sb[2]);
        for (int j = 0; j < 5; ++j) {
            const CollocationPoint p{s.spatial.points(0, j), s.spatial.points(1, j), s.spatial.points(2, j),
                                     s.spatial.normal(0, j), s.spatial.normal(1, j), 0};
            const FdNet um{m};
            const double tx = -p.ny, ty = p.nx;
            EXPECT_NEAR(residual_emission(m, f, ue, k, p, EmissionResidual::sb1, tang),
                        um.uab(p.x, p.y, p.t, p.nx, p.ny, tx, ty) + k.beta * um.un(p.x, p.y, p.t, tx, ty), 1e-5);
        }
    }
}

// u = 1 + beta x + 0.3 y on the left edge (n = -e_x, tau = -e_y): B u = 0.3 beta y.
TEST(EmpiricalLoss, BoundaryDerivativeModesOnAffineNet) {
    const double beta = 0.7;
    const Mlp u = affine_net(beta, 0.3, 0.0, 1.0);
    const Coefficients k{1, 1, 0.1, beta};
    const CollocationPoint left{0.0, 0.4, 0.5, -1, 0, 0};
    EXPECT_NEAR(residual_emission(u, u, u, k, left, EmissionResidual::sb0), 0.3 * beta * 0.4, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, left, EmissionResidual::sb1, BoundaryDerivative::tangential),
                -0.3 * beta, 1e-14);
    EXPECT_NEAR(residual_emission(u, u, u, k, left, EmissionResidual::sb1), -beta * beta, 1e-14);
}

TEST(EmpiricalLoss, J1MatchesFiniteDifferenceReference) {
    const auto cfg = small_config();
    const Coefficients k{0.9, 1.2, 0.1, 0.8};
    const Mlp e = random_net(3);
    const auto s = sample_collocation(cfg, cfg.collocation, RngStream(1, "c"), 0);
    const FdNet u{e};
    double ri = 0, rs = 0, rt = 0;
    for (int j = 0; j < s.interior.size(); ++j) {
        const double x = s.interior.points(0, j), y = s.interior.points(1, j), t = s.interior.points(2, j);
        ri += s.interior.weight(j) *
              std::pow(u.ut(x, y, t) / k.c - k.kappa * u.lap(x, y, t) + k.mu_a * u.u(x, y, t), 2);
    }
    for (int j = 0; j < s.spatial.size(); ++j) {
        const double x = s.spatial.points(0, j), y = s.spatial.points(1, j), t = s.spatial.points(2, j);
        const double r = u.un(x, y, t, s.spatial.normal(0, j), s.spatial.normal(1, j)) + k.beta * u.u(x, y, t) +
                         20 * t * x * (x - 1);
        rs += s.spatial.weight(j) * r * r;
    }
    for (int j = 0; j < s.temporal.size(); ++j)
        rt += s.temporal.weight(j) * std::pow(u.u(s.temporal.points(0, j), s.temporal.points(1, j), 0), 2);
    const auto b = empirical_loss_j1(e, s, k);
    EXPECT_NEAR(b.interior, ri, 1e-4 * ri);
    EXPECT_NEAR(b.sb[0], rs, 1e-6 * rs);
    EXPECT_NEAR(b.tb0, rt, 1e-12 * rt);
}

TEST(EmpiricalLoss, DataTermIsExactlyLinearInLambda) {
    const auto cfg = small_config();
    RngStream drng(5, "data");
    const auto data = fake_data(80, drng);
    const Mlp f = random_net(1), m = random_net(2), ue = random_net(3);
    const auto s = sample_collocation(cfg, cfg.collocation, RngStream(4, "c"), 0, data);
    const auto b0 = empirical_loss_j2(f, m, ue, s, cfg.coefficients, 0.0);
    EXPECT_EQ(b0.total(), b0.interior + b0.sb[0] + b0.sb[1] + b0.sb[2] + b0.sb[3] + b0.tb0 + b0.tb1);
    for (double lambda : {0.1, 1.0, 100.0}) {
        const auto b = empirical_loss_j2(f, m, ue, s, cfg.coefficients, lambda);
        EXPECT_EQ(b.d, b0.d);
        EXPECT_NEAR(b.total() - b0.total(), lambda * b0.d, 1e-12 * b.total());
    }
}

TEST(EmpiricalLoss, NonNegativeOnRandomInputs) {
    const auto cfg = small_config();
    RngStream drng(6, "data");
    const auto data = fake_data(80, drng);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = sample_collocation(cfg, cfg.collocation, RngStream(trial, "c"), 0, data);
        const auto b = empirical_loss_j2(random_net(trial), random_net(trial + 50), random_net(trial + 99), s,
                                         cfg.coefficients, 10.0);
        EXPECT_GE(b.interior, 0.0);
        for (double v : b.sb) EXPECT_GE(v, 0.0);
        EXPECT_GE(b.tb0, 0.0);
        EXPECT_GE(b.tb1, 0.0);
        EXPECT_GE(b.d, 0.0);
    }
}

// Directional finite differences of J1 and J2 against the analytic parameter gradients.
TEST(EmpiricalLoss, GradientsMatchFiniteDifferences) {
    const auto cfg = small_config();
    const Coefficients k{1.1, 0.9, 0.15, 1.3};
    RngStream drng(7, "data");
    const auto data = fake_data(80, drng);
    const auto s = sample_collocation(cfg, cfg.collocation, RngStream(2, "c"), 0, data);
    RngStream dir(8, "direction");
    const double eps = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        Mlp f = random_net(100 + trial), m = random_net(200 + trial);
        const Mlp ue = random_net(300 + trial);
        std::vector<double> gf, gm, ge;
        empirical_loss_j2(f, m, ue, s, k, 5.0, &gf, &gm);
        empirical_loss_j1(m, s, k, &ge);
        auto check = [&](Mlp& net, const std::vector<double>& grad, const std::function<double()>& loss) {
            std::vector<double> d(net.param_count());
            for (double& v : d) v = dir.normal();
            const auto base = net.params();
            for (std::size_t i = 0; i < d.size(); ++i) net.params()[i] = base[i] + eps * d[i];
            const double lp = loss();
            for (std::size_t i = 0; i < d.size(); ++i) net.params()[i] = base[i] - eps * d[i];
            const double lm = loss();
            net.params() = base;
            double analytic = 0;
            for (std::size_t i = 0; i < d.size(); ++i) analytic += grad[i] * d[i];
            const double fd = (lp - lm) / (2 * eps);
            EXPECT_NEAR(analytic, fd, 1e-5 * std::max(std::abs(fd), 1.0));
        };
        check(f, gf, [&] { return empirical_loss_j2(f, m, ue, s, k, 5.0).total(); });
        check(m, gm, [&] { return empirical_loss_j2(f, m, ue, s, k, 5.0).total(); });
        const auto tang = BoundaryDerivative::tangential;
        empirical_loss_j2(f, m, ue, s, k, 5.0, &gf, &gm, tang);
        check(m, gm, [&] { return empirical_loss_j2(f, m, ue, s, k, 5.0, nullptr, nullptr, tang).total(); });
        check(m, ge, [&] { return empirical_loss_j1(m, s, k).total(); });
    }
}

TEST(TrainingErrors, SquareRootsReconcileWithTotal) {
    LossBreakdown b;
    EXPECT_EQ(training_errors(b).at("total"), 0.0);
    b.interior = 4;
    EXPECT_EQ(training_errors(b).at("E_int"), 2.0);
    b = {0.3, {0.1, 0.2, 0.05, 0.01}, 0.07, 0.02, 0.4, 100};
    const auto e = training_errors(b);
    double sum = e.at("lambda") * std::pow(e.at("E_d"), 2) + std::pow(e.at("E_int"), 2) + std::pow(e.at("E_tb0"), 2) +
                 std::pow(e.at("E_tb1"), 2);
    for (int k = 0; k < 4; ++k) sum += std::pow(e.at("E_sb" + std::to_string(k)), 2);
    EXPECT_NEAR(sum, e.at("total"), 1e-12 * e.at("total"));
}
