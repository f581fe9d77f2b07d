#include "fdot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace fdot {

std::vector<double> TestMesh::times() const {
    std::vector<double> out(nt);
    for (int k = 0; k < nt; ++k) out[k] = t(k);
    return out;
}

JetTape::Points TestMesh::points() const {
    JetTape::Points p(3, size());
    int n = 0;
    for (int k = 0; k < nt; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i, ++n) p.col(n) << x(i), y(j), t(k);
    return p;
}

Eigen::VectorXd TestMesh::time_weights() const {
    const auto w = trapezoid_weights(times());
    Eigen::VectorXd out(size());
    for (int k = 0; k < nt; ++k) out.segment(static_cast<Eigen::Index>(k) * slice_size(), slice_size()).setConstant(w[k]);
    return out;
}

Eigen::VectorXd sample(const TestMesh& mesh, const SpaceTimeFn& f) {
    const auto p = mesh.points();
    Eigen::VectorXd out(p.cols());
    for (int n = 0; n < p.cols(); ++n) out(n) = f(p(0, n), p(1, n), p(2, n));
    return out;
}

Eigen::VectorXd sample(const TestMesh& mesh, const Mlp& net) { return evaluate(net, mesh.points()); }

namespace {

bool use(const Mask& mask, const Eigen::VectorXd& a, const Eigen::VectorXd& e, Eigen::Index n) {
    return (mask.empty() || mask[n]) && std::isfinite(a(n)) && std::isfinite(e(n));
}

}  // namespace

double relative_l2(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact, const Mask& mask,
                   const Eigen::VectorXd& weights) {
    if (approx.size() != exact.size()) throw std::invalid_argument("relative_l2: sizes differ");
    if (!mask.empty() && mask.size() != static_cast<std::size_t>(exact.size()))
        throw std::invalid_argument("relative_l2: mask size differs");
    if (weights.size() != 0 && weights.size() != exact.size())
        throw std::invalid_argument("relative_l2: weight size differs");
    double num = 0, den = 0;
    for (Eigen::Index n = 0; n < exact.size(); ++n) {
        if (!use(mask, approx, exact, n)) continue;
        const double w = weights.size() ? weights(n) : 1.0;
        num += w * (approx(n) - exact(n)) * (approx(n) - exact(n));
        den += w * exact(n) * exact(n);
    }
    if (den == 0) return num == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

std::vector<Record> timeseries_error(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact, const TestMesh& mesh,
                                     const Mask& mask) {
    if (approx.size() != mesh.size() || exact.size() != mesh.size())
        throw std::invalid_argument("timeseries_error: fields do not match the test mesh");
    std::vector<Record> out;
    const int m = mesh.slice_size();
    for (int k = 0; k < mesh.nt; ++k) {
        double num = 0, den = 0;
        for (int i = 0; i < m; ++i) {
            const Eigen::Index n = static_cast<Eigen::Index>(k) * m + i;
            if (!use(mask, approx, exact, n)) continue;
            num += (approx(n) - exact(n)) * (approx(n) - exact(n));
            den += exact(n) * exact(n);
        }
        const double err = den > 0 ? std::sqrt(num / den) : (num == 0 ? 0.0 : std::numeric_limits<double>::infinity());
        out.push_back({{"t", mesh.t(k)}, {"error", err}, {"num", num}, {"den", den}});
    }
    return out;
}

double aggregate_slices(const std::vector<Record>& slices, const TestMesh& mesh) {
    const auto w = trapezoid_weights(mesh.times());
    if (slices.size() != w.size()) throw std::invalid_argument("aggregate_slices: one record per time level expected");
    double num = 0, den = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double e = slices[k].at("error");
        const double d = slices[k].at("den");
        num += w[k] * e * e * d;
        den += w[k] * d;
    }
    return den > 0 ? std::sqrt(num / den) : 0.0;
}

double interpolate(const FieldSeries& field, double x, double y, double t) {
    const auto& g = *field.grid();
    const auto& times = field.times();
    auto locate = [](double v, double lo, double h, int n, int& i, double& f) {
        const double s = std::clamp((v - lo) / h, 0.0, static_cast<double>(n - 1));
        i = std::min(static_cast<int>(s), n - 2);
        f = s - i;
    };
    int i, j;
    double fx, fy;
    locate(x, g.domain().x_min, g.hx(), g.nx(), i, fx);
    locate(y, g.domain().y_min, g.hy(), g.ny(), j, fy);

    int k = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
    k = std::clamp(k, 0, field.levels() - 2);
    const double ft = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);

    auto level = [&](int lvl) {
        const double v00 = field.at(lvl, g.node(i, j)), v10 = field.at(lvl, g.node(i + 1, j));
        const double v01 = field.at(lvl, g.node(i, j + 1)), v11 = field.at(lvl, g.node(i + 1, j + 1));
        return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
    };
    return (1 - ft) * level(k) + ft * level(k + 1);
}

double mu_f_error(const Mlp& net_f, const ExactSourceSpec& spec, const TestMesh& mesh) {
    const Eigen::VectorXd exact = sample(mesh, [&](double x, double y, double t) { return exact_mu_f(spec, x, y, t); });
    return relative_l2(sample(mesh, net_f), exact);
}

std::vector<MeasurementSample> synthesize_data(const ExperimentConfig& cfg) {
    cfg.validate();
    const GridPtr data_grid = make_data_grid(cfg);
    const GridPtr grid = make_grid(cfg);
    const BoundaryTrace clean =
        generate_measurement(cfg.coefficients, data_grid, *grid, ExactSourceSpec::from_name(cfg.example));
    RngStream rng(cfg.rng_seed, "noise");
    return to_samples(clean, add_noise(clean, cfg.noise_delta, rng));
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_std of an empty list");
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

std::vector<Record> SweepResult::per_seed_rows() const {
    std::vector<Record> out;
    for (const auto& c : cells)
        out.push_back({{"lambda", c.lambda}, {"seed", static_cast<double>(c.seed)}, {"error", c.error}});
    return out;
}

SweepResult summarize(std::vector<SweepCell> cells) {
    SweepResult res;
    res.cells = std::move(cells);
    std::vector<double> order;
    std::map<double, std::vector<double>> by_lambda;
    for (const auto& c : res.cells) {
        if (!by_lambda.count(c.lambda)) order.push_back(c.lambda);
        by_lambda[c.lambda].push_back(c.error);
    }
    for (double lam : order) {
        const auto [m, s] = mean_std(by_lambda[lam]);
        res.summary.push_back(
            {{"lambda", lam}, {"mean", m}, {"std", s}, {"seeds", static_cast<double>(by_lambda[lam].size())}});
    }
    return res;
}

SweepResult lambda_sweep(const ExperimentConfig& cfg, const std::vector<double>& lambdas,
                         const std::vector<std::uint64_t>& seeds, const Mlp& ue_star, std::ostream* progress) {
    if (lambdas.empty() || seeds.empty()) throw std::invalid_argument("lambda sweep needs at least one lambda and seed");
    const TestMesh mesh = TestMesh::from(cfg);
    const ExactSourceSpec spec = ExactSourceSpec::from_name(cfg.example);
    std::vector<SweepCell> cells;
    for (double lam : lambdas) {
        for (std::uint64_t seed : seeds) {
            ExperimentConfig c = cfg;
            c.lambda_weight = lam;
            c.rng_seed = seed;
            const auto data = synthesize_data(c);
            const InverseResult run = train_inverse(c, ue_star, data);
            cells.push_back({lam, seed, mu_f_error(run.net_f, spec, mesh)});
            if (progress) *progress << "lambda=" << lam << " seed=" << seed << " error=" << cells.back().error << '\n';
        }
    }
    return summarize(std::move(cells));
}

}  // namespace fdot
