#include "fdot/metrics.hpp"
#include "fdot/train.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fdot;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.net_excitation.widths = {3, 6, 1};
    cfg.net_emission.widths = {3, 6, 1};
    cfg.net_source.widths = {3, 4, 1};
    cfg.excitation_collocation = {32, 64, 32, 0};
    cfg.collocation = {32, 64, 32, 32};
    cfg.grid = {9, 9, 9};
    cfg.K1 = 20;
    cfg.K2 = 20;
    return cfg;
}

std::vector<MeasurementSample> tiny_data(const ExperimentConfig& cfg) {
    const auto g = make_grid(cfg);
    const auto clean = generate_measurement(cfg.coefficients, g, ExactSourceSpec::example2());
    RngStream rng(cfg.rng_seed, "noise");
    return to_samples(clean, add_noise(clean, cfg.noise_delta, rng));
}

}  // namespace

TEST(Adam, FirstStepMovesBySignTimesRate) {
    AdamState s(3);
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{4.0, -0.25, 0.0};
    adam_step(s, p, g, 0.01);
    // m_hat = g and v_hat = g^2 after one step, so the update is rate * g / (|g| + eps).
    EXPECT_NEAR(p[0], 1.0 - 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], -2.0 + 0.01 * 0.25 / (0.25 + 1e-8), 1e-15);
    EXPECT_EQ(p[2], 0.5);
    EXPECT_EQ(s.step, 1);
}

TEST(Adam, SecondStepMatchesClosedForm) {
    AdamState s(1);
    std::vector<double> p{0.0};
    adam_step(s, p, std::vector<double>{1.0}, 0.1);
    adam_step(s, p, std::vector<double>{3.0}, 0.1);
    const double m = 0.9 * 0.1 * 1 + 0.1 * 3, v = 0.999 * 0.001 * 1 + 0.001 * 9;
    const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
    const double first = -0.1 * 1.0 / (1.0 + 1e-8);
    EXPECT_NEAR(p[0], first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-15);
}

TEST(Adam, RejectsNonFiniteGradientWithoutSideEffects) {
    AdamState s(2);
    std::vector<double> p{1.0, 2.0};
    EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0, NAN}, 0.1), TrainingError);
    EXPECT_EQ(s.step, 0);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(s.m, (std::vector<double>{0.0, 0.0}));
    EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0}, 0.1), std::invalid_argument);
}

TEST(Schedule, StepDecayIsExact) {
    const Schedule s(2e-3, 0.1, 5000);
    for (int e : {0, 1, 4999, 5000, 9999, 10000, 12345, 40000}) {
        double expected = 2e-3;
        for (int k = 0; k < e / 5000; ++k) expected *= 0.1;
        EXPECT_EQ(s.rate(e), expected) << e;
        EXPECT_NEAR(s.rate(e), 2e-3 * std::pow(0.1, e / 5000), 1e-15 * s.rate(e));
    }
    EXPECT_EQ(Schedule(1.0, 1.0, 1).rate(1000), 1.0);
    EXPECT_THROW(Schedule(0.0, 0.1, 10), std::invalid_argument);
    EXPECT_THROW(Schedule(1.0, 1.5, 10), std::invalid_argument);
    EXPECT_THROW(Schedule(1.0, 0.1, 0), std::invalid_argument);
}

TEST(ClipGlobalNorm, ScalesOnlyAboveThreshold) {
    std::vector<double> a{3.0}, b{4.0};
    std::vector<double>* blocks[] = {&a, &b};
    EXPECT_DOUBLE_EQ(clip_global_norm(blocks, 10.0), 5.0);
    EXPECT_EQ(a[0], 3.0);
    EXPECT_DOUBLE_EQ(clip_global_norm(blocks, 1.0), 5.0);
    EXPECT_DOUBLE_EQ(std::hypot(a[0], b[0]), 1.0);
    EXPECT_DOUBLE_EQ(a[0] / b[0], 0.75);
}

TEST(TrainExcitation, ZeroEpochsReturnsInitialization) {
    auto cfg = tiny_config();
    cfg.K1 = 0;
    int calls = 0;
    TrainOptions opts;
    opts.evaluate = [&](int epoch, const Mlp&, const Mlp* other) {
        ++calls;
        EXPECT_EQ(epoch, 0);
        EXPECT_EQ(other, nullptr);
        return Record{};
    };
    const auto res = train_excitation(cfg, opts);
    RngStream init(cfg.rng_seed, "init/excitation");
    EXPECT_EQ(res.net, init_mlp(cfg.net_excitation.widths, init));
    EXPECT_TRUE(res.log.empty());
    EXPECT_EQ(calls, 1);
    ASSERT_EQ(res.eval_log.size(), 1u);
    EXPECT_GT(res.eval_log[0].at("loss"), 0.0);
}

TEST(TrainInverse, ZeroEpochsLossEqualsInitialLoss) {
    auto cfg = tiny_config();
    cfg.K2 = 0;
    cfg.noise_delta = 0;
    const auto data = tiny_data(cfg);
    const Mlp ue = train_excitation(cfg).net;
    TrainOptions opts;
    opts.evaluate = [](int, const Mlp&, const Mlp*) { return Record{}; };
    const auto res = train_inverse(cfg, ue, data, opts);
    RngStream init_f(cfg.rng_seed, "init/source"), init_m(cfg.rng_seed, "init/emission");
    const Mlp f0 = init_mlp(cfg.net_source.widths, init_f), m0 = init_mlp(cfg.net_emission.widths, init_m);
    EXPECT_EQ(res.net_f, f0);
    EXPECT_EQ(res.net_m, m0);
    const auto set = sample_collocation(cfg, cfg.collocation, RngStream(cfg.rng_seed, "collocation/inverse"), 0, data);
    ASSERT_EQ(res.eval_log.size(), 1u);
    EXPECT_EQ(res.eval_log[0].at("loss"), empirical_loss_j2(f0, m0, ue, set, cfg.coefficients, cfg.lambda_weight).total());
}

TEST(TrainInverse, LogsAreBitIdenticalAcrossRuns) {
    const auto cfg = tiny_config();
    const auto data = tiny_data(cfg);
    const auto e1 = train_excitation(cfg), e2 = train_excitation(cfg);
    EXPECT_EQ(e1.log, e2.log);
    EXPECT_EQ(e1.net, e2.net);
    const auto a = train_inverse(cfg, e1.net, data), b = train_inverse(cfg, e1.net, data);
    ASSERT_EQ(a.log.size(), static_cast<std::size_t>(cfg.K2));
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(a.net_f, b.net_f);
    EXPECT_EQ(a.net_m, b.net_m);

    auto other = cfg;
    other.rng_seed = 1;
    EXPECT_NE(train_inverse(other, e1.net, data).log, a.log);
}

TEST(TrainInverse, LogColumnsAndRates) {
    auto cfg = tiny_config();
    cfg.schedule_inverse = {1e-3, 0.5, 7};
    cfg.log_interval = 5;
    const auto data = tiny_data(cfg);
    const auto res = train_inverse(cfg, train_excitation(cfg).net, data);
    ASSERT_EQ(res.log.size(), 4u);
    const auto cols = log_columns();
    for (const auto& row : res.log) {
        EXPECT_EQ(row.size(), cols.size());
        for (const auto& c : cols) EXPECT_TRUE(row.count(c)) << c;
        EXPECT_EQ(row.at("rate"), Schedule(1e-3, 0.5, 7).rate(static_cast<int>(row.at("epoch"))));
        EXPECT_EQ(row.at("lambda"), cfg.lambda_weight);
        const double total = row.at("lambda") * row.at("d") + row.at("interior") + row.at("sb0") + row.at("sb1") +
                             row.at("sb2") + row.at("sb3") + row.at("tb0") + row.at("tb1");
        EXPECT_NEAR(row.at("total"), total, 1e-12 * total);
    }
}

TEST(TrainInverse, ClippingIsReportedAndBounded) {
    auto cfg = tiny_config();
    cfg.lambda_weight = 1e8;  // huge data weight forces large gradients
    const auto data = tiny_data(cfg);
    const auto res = train_inverse(cfg, train_excitation(cfg).net, data);
    bool any = false;
    for (const auto& row : res.log) {
        EXPECT_EQ(row.at("clipped"), row.at("grad_norm") > kClipNorm ? 1.0 : 0.0);
        any |= row.at("clipped") == 1.0;
    }
    EXPECT_TRUE(any);
}

TEST(TrainInverse, RejectsInvalidConfig) {
    auto cfg = tiny_config();
    cfg.lambda_weight = -1;
    EXPECT_THROW(train_inverse(cfg, Mlp({3, 1}), {}), ConfigError);
}

// Example 1 excitation benchmark at reduced scale: the window-100 smoothed loss falls below 10% of its
// starting value.
TEST(TrainExcitation, SmoothedLossDecreases) {
    ExperimentConfig cfg;
    cfg.example = "example1";
    cfg.K1 = 2000;
    const auto res = train_excitation(cfg);
    ASSERT_EQ(res.log.size(), 2000u);
    auto window_mean = [&](std::size_t from) {
        double s = 0;
        for (std::size_t i = from; i < from + 100; ++i) s += res.log[i].at("total");
        return s / 100;
    };
    EXPECT_LT(window_mean(res.log.size() - 100), 0.1 * window_mean(0));
}
