#include "fdot/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fdot;

namespace {

TestMesh small_mesh() { return {Domain{}, 1.0, 7, 6, 5}; }

Eigen::VectorXd random_field(int n, std::uint64_t seed, double offset = 0) {
    RngStream rng(seed, "field");
    Eigen::VectorXd v(n);
    for (auto& x : v) x = offset + rng.normal();
    return v;
}

}  // namespace

TEST(TestMeshLayout, TimeMajorOrderingAndDefaults) {
    const TestMesh m = small_mesh();
    const auto p = m.points();
    ASSERT_EQ(p.cols(), 7 * 6 * 5);
    EXPECT_EQ(p(0, 1), m.x(1));
    EXPECT_EQ(p(1, 7), m.y(1));
    EXPECT_EQ(p(2, 42), m.t(1));
    EXPECT_EQ(m.t(4), 1.0);
    EXPECT_EQ(m.x(6), 1.0);
    const auto d = TestMesh::from(ExperimentConfig{});
    EXPECT_EQ(d.size(), 50 * 50 * 50);
}

TEST(RelativeL2, TrivialValues) {
    const auto e = random_field(100, 1, 3.0);
    EXPECT_EQ(relative_l2(e, e), 0.0);
    EXPECT_NEAR(relative_l2(1.1 * e, e), 0.1, 1e-14);
    EXPECT_NEAR(relative_l2(Eigen::VectorXd::Zero(100), e), 1.0, 1e-15);
    EXPECT_EQ(relative_l2(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)), 0.0);
    EXPECT_TRUE(std::isinf(relative_l2(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3))));
    EXPECT_THROW(relative_l2(e, random_field(99, 1)), std::invalid_argument);
}

TEST(RelativeL2, ScaleInvariantInThePair) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto a = random_field(50, s), e = random_field(50, s + 100, 1.0);
        const double base = relative_l2(a, e);
        for (double c : {-3.0, 0.5, 1e6}) EXPECT_NEAR(relative_l2(c * a, c * e), base, 1e-14 * base);
    }
}

TEST(RelativeL2, MaskAndNonFiniteEntriesAreExcludedFromBothSums) {
    Eigen::VectorXd e(4), a(4);
    e << 1, 2, 3, 4;
    a << 1, 2, 100, NAN;
    const Mask mask{1, 1, 0, 1};
    EXPECT_EQ(relative_l2(a, e, mask), 0.0);
    // entry 2 is masked and entry 3 is NaN, so only the first two count
    Eigen::VectorXd e2(2), a2(2);
    e2 << 1, 2;
    a2 << 2, 2;
    Eigen::VectorXd a3 = a;
    a3(0) = 2;
    EXPECT_DOUBLE_EQ(relative_l2(a3, e, mask), relative_l2(a2, e2));
    EXPECT_THROW(relative_l2(a, e, Mask{1, 1}), std::invalid_argument);
}

TEST(Timeseries, IdenticalFieldsGiveZeros) {
    const TestMesh m = small_mesh();
    const auto e = random_field(m.size(), 3, 2.0);
    for (const auto& r : timeseries_error(e, e, m)) EXPECT_EQ(r.at("error"), 0.0);
}

TEST(Timeseries, SliceBiasOnlyAffectsThatSlice) {
    const TestMesh m = small_mesh();
    const auto e = random_field(m.size(), 4, 2.0);
    Eigen::VectorXd a = e;
    a.segment(2 * m.slice_size(), m.slice_size()).array() += 0.5;
    const auto ts = timeseries_error(a, e, m);
    ASSERT_EQ(ts.size(), 5u);
    for (int k = 0; k < 5; ++k) {
        EXPECT_EQ(ts[k].at("t"), m.t(k));
        if (k == 2) {
            EXPECT_GT(ts[k].at("error"), 0.0);
        } else {
            EXPECT_EQ(ts[k].at("error"), 0.0);
        }
    }
}

TEST(Timeseries, SlicesReconcileWithWeightedGlobalError) {
    const TestMesh m = small_mesh();
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Eigen::VectorXd e = random_field(m.size(), s, 1.5);
        const Eigen::VectorXd a = e + 0.3 * random_field(m.size(), s + 50);
        Mask mask(m.size(), 1);
        for (int n = 0; n < m.size(); n += 7) mask[n] = 0;
        const double global = relative_l2(a, e, mask, m.time_weights());
        EXPECT_NEAR(aggregate_slices(timeseries_error(a, e, m, mask), m), global, 1e-12 * global);
    }
}

TEST(Interpolate, ExactForTrilinearFields) {
    const auto g = make_grid(Domain{0, 2, 0, 1}, 1.0, 9, 5, 5);
    FieldSeries f(g);
    auto fn = [](double x, double y, double t) { return 1 + 2 * x - y + 3 * t + x * y * t; };
    for (int l = 0; l < f.levels(); ++l)
        for (int n = 0; n < f.nodes(); ++n) f.at(l, n) = fn(g->x(n), g->y(n), g->t(l));
    RngStream rng(2, "pts");
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform(0, 2), y = rng.uniform(), t = rng.uniform();
        EXPECT_NEAR(interpolate(f, x, y, t), fn(x, y, t), 1e-12);
    }
    EXPECT_NEAR(interpolate(f, 2, 1, 1), fn(2, 1, 1), 1e-12);
    EXPECT_NEAR(interpolate(f, 0, 0, 0), fn(0, 0, 0), 1e-12);
}

TEST(MuFError, ConstantNetworks) {
    const TestMesh m = small_mesh();
    Mlp zero({3, 1});
    EXPECT_NEAR(mu_f_error(zero, ExactSourceSpec::example2(), m), 1.0, 1e-15);
    Mlp constant({3, 1});
    constant.bias(1)(0) = 2.0;
    const Eigen::VectorXd exact = sample(m, [](double x, double y, double t) {
        return exact_mu_f(ExactSourceSpec::example1(), x, y, t);
    });
    EXPECT_NEAR(mu_f_error(constant, ExactSourceSpec::example1(), m),
                relative_l2(Eigen::VectorXd::Constant(m.size(), 2.0), exact), 1e-14);
}

TEST(MeanStd, PopulationStatistics) {
    const auto [m, s] = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_DOUBLE_EQ(m, 5.0);
    EXPECT_DOUBLE_EQ(s, 2.0);
    EXPECT_EQ(mean_std({0.3}).second, 0.0);
    EXPECT_THROW(mean_std({}), std::invalid_argument);
}

TEST(Sweep, SummaryReconcilesWithPerSeedRows) {
    const std::vector<SweepCell> cells{{100, 0, 0.08}, {100, 1, 0.09}, {100, 2, 0.10}, {0.1, 0, 0.2}, {0.1, 1, 0.18}};
    const auto r = summarize(cells);
    ASSERT_EQ(r.summary.size(), 2u);
    EXPECT_EQ(r.summary[0].at("lambda"), 100);
    EXPECT_EQ(r.summary[0].at("seeds"), 3);
    EXPECT_NEAR(r.summary[0].at("mean"), 0.09, 1e-15);
    EXPECT_NEAR(r.summary[0].at("std"), std::sqrt(2.0 / 3) * 0.01, 1e-15);
    EXPECT_NEAR(r.summary[1].at("mean"), 0.19, 1e-15);
    const auto rows = r.per_seed_rows();
    ASSERT_EQ(rows.size(), 5u);
    for (const auto& s : r.summary) {
        std::vector<double> errs;
        for (const auto& row : rows)
            if (row.at("lambda") == s.at("lambda")) errs.push_back(row.at("error"));
        const auto [m, sd] = mean_std(errs);
        EXPECT_EQ(m, s.at("mean"));
        EXPECT_EQ(sd, s.at("std"));
    }
    const auto single = summarize({{10, 4, 0.5}});
    EXPECT_EQ(single.summary.size(), 1u);
    EXPECT_EQ(single.summary[0].at("std"), 0.0);
}

TEST(Sweep, RejectsEmptyInputs) {
    EXPECT_THROW(lambda_sweep(ExperimentConfig{}, {}, {0}, Mlp({3, 1})), std::invalid_argument);
    EXPECT_THROW(lambda_sweep(ExperimentConfig{}, {1.0}, {}, Mlp({3, 1})), std::invalid_argument);
}

TEST(SynthesizeData, DeterministicAndBounded) {
    ExperimentConfig cfg;
    cfg.grid = {9, 9, 9};
    const auto a = synthesize_data(cfg), b = synthesize_data(cfg);
    ASSERT_EQ(a.size(), b.size());
    ASSERT_FALSE(a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].noisy_value, b[i].noisy_value);
        EXPECT_LE(std::abs(a[i].noisy_value - a[i].value), cfg.noise_delta);
    }
    cfg.rng_seed = 5;
    EXPECT_NE(synthesize_data(cfg)[0].noisy_value, a[0].noisy_value);
}
