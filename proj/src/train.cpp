#include "fdot/train.hpp"

#include <cmath>
#include <ostream>

namespace fdot {

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad, double rate) {
    if (params.size() != grad.size() || s.m.size() != params.size() || s.v.size() != params.size())
        throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw TrainingError("non-finite gradient entry " + std::to_string(i) + " at Adam step " +
                                std::to_string(s.step + 1));
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1 - s.beta2) * grad[i] * grad[i];
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        params[i] -= rate * mhat / (std::sqrt(vhat) + s.eps);
    }
}

Schedule::Schedule(double initial_, double factor_, int interval_)
    : initial(initial_), factor(factor_), interval(interval_) {
    if (!(initial > 0)) throw std::invalid_argument("learning rate must be positive");
    if (!(factor > 0 && factor <= 1)) throw std::invalid_argument("decay factor must lie in (0, 1]");
    if (interval < 1) throw std::invalid_argument("decay interval must be at least 1");
}

double Schedule::rate(int epoch) const {
    double r = initial;
    for (int k = epoch / interval; k > 0; --k) r *= factor;
    return r;
}

double clip_global_norm(std::span<std::vector<double>* const> grads, double max_norm) {
    double sq = 0;
    for (const auto* g : grads)
        for (double v : *g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto* g : grads)
            for (double& v : *g) v *= s;
    }
    return norm;
}

std::vector<std::string> log_columns() {
    return {"epoch", "rate", "interior", "sb0", "sb1", "sb2", "sb3", "tb0", "tb1", "d", "lambda", "total",
            "grad_norm", "clipped"};
}

namespace {

Record log_row(int epoch, double rate, const LossBreakdown& b, double grad_norm) {
    return {{"epoch", epoch},   {"rate", rate},   {"interior", b.interior}, {"sb0", b.sb[0]},
            {"sb1", b.sb[1]},   {"sb2", b.sb[2]}, {"sb3", b.sb[3]},         {"tb0", b.tb0},
            {"tb1", b.tb1},     {"d", b.d},       {"lambda", b.lambda},     {"total", b.total()},
            {"grad_norm", grad_norm}, {"clipped", grad_norm > kClipNorm ? 1.0 : 0.0}};
}

void check_finite(const LossBreakdown& b, int epoch) {
    if (!std::isfinite(b.total())) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
}

bool due(int epoch, int interval) { return interval > 0 && epoch % interval == 0; }

void report(const TrainOptions& opts, const Record& r) {
    if (!opts.progress) return;
    bool first = true;
    for (const auto& [k, v] : r) {
        *opts.progress << (first ? "" : " ") << k << '=' << v;
        first = false;
    }
    *opts.progress << '\n';
}

}  // namespace

ExcitationResult train_excitation(const ExperimentConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    RngStream init_rng(cfg.rng_seed, "init/excitation");
    const RngStream sample_rng(cfg.rng_seed, "collocation/excitation");
    ExcitationResult res{init_mlp(cfg.net_excitation.widths, init_rng), {}, {}};
    const Schedule schedule(cfg.schedule_excitation);
    AdamState adam(res.net.param_count());
    std::vector<double> grad;

    for (int epoch = 0; epoch < cfg.K1; ++epoch) {
        const CollocationSet set = sample_collocation(cfg, cfg.excitation_collocation, sample_rng, epoch);
        const LossBreakdown b = empirical_loss_j1(res.net, set, cfg.coefficients, &grad);
        check_finite(b, epoch);
        std::vector<double>* blocks[] = {&grad};
        const double norm = clip_global_norm(blocks, kClipNorm);
        const double rate = schedule.rate(epoch);
        if (due(epoch, cfg.log_interval)) res.log.push_back(log_row(epoch, rate, b, norm));
        if (opts.evaluate && due(epoch, cfg.eval_interval)) {
            Record r = opts.evaluate(epoch, res.net, nullptr);
            r["epoch"] = epoch;
            r["loss"] = b.total();
            report(opts, r);
            res.eval_log.push_back(std::move(r));
        }
        adam_step(adam, res.net.params(), grad, rate);
    }
    if (opts.evaluate) {
        Record r = opts.evaluate(cfg.K1, res.net, nullptr);
        r["epoch"] = cfg.K1;
        r["loss"] = empirical_loss_j1(res.net, sample_collocation(cfg, cfg.excitation_collocation, sample_rng, cfg.K1),
                                      cfg.coefficients)
                        .total();
        report(opts, r);
        res.eval_log.push_back(std::move(r));
    }
    return res;
}

InverseResult train_inverse(const ExperimentConfig& cfg, const Mlp& ue_star, const std::vector<MeasurementSample>& data,
                            const TrainOptions& opts) {
    cfg.validate();
    RngStream init_f(cfg.rng_seed, "init/source");
    RngStream init_m(cfg.rng_seed, "init/emission");
    const RngStream sample_rng(cfg.rng_seed, "collocation/inverse");
    InverseResult res{init_mlp(cfg.net_source.widths, init_f), init_mlp(cfg.net_emission.widths, init_m), {}, {}};

    const Schedule shared(cfg.schedule_inverse);
    const Schedule sched_f(cfg.rate_source > 0 ? cfg.rate_source : shared.initial, shared.factor, shared.interval);
    const Schedule sched_m(cfg.rate_emission > 0 ? cfg.rate_emission : shared.initial, shared.factor, shared.interval);
    AdamState adam_f(res.net_f.param_count()), adam_m(res.net_m.param_count());
    std::vector<double> grad_f, grad_m;

    for (int epoch = 0; epoch < cfg.K2; ++epoch) {
        const CollocationSet set = sample_collocation(cfg, cfg.collocation, sample_rng, epoch, data);
        const LossBreakdown b = empirical_loss_j2(res.net_f, res.net_m, ue_star, set, cfg.coefficients,
                                                  cfg.lambda_weight, &grad_f, &grad_m, cfg.boundary_derivative);
        check_finite(b, epoch);
        std::vector<double>* blocks[] = {&grad_f, &grad_m};
        const double norm = clip_global_norm(blocks, kClipNorm);
        if (due(epoch, cfg.log_interval)) res.log.push_back(log_row(epoch, sched_f.rate(epoch), b, norm));
        if (opts.evaluate && due(epoch, cfg.eval_interval)) {
            Record r = opts.evaluate(epoch, res.net_f, &res.net_m);
            r["epoch"] = epoch;
            r["loss"] = b.total();
            report(opts, r);
            res.eval_log.push_back(std::move(r));
        }
        adam_step(adam_f, res.net_f.params(), grad_f, sched_f.rate(epoch));
        adam_step(adam_m, res.net_m.params(), grad_m, sched_m.rate(epoch));
    }
    if (opts.evaluate) {
        Record r = opts.evaluate(cfg.K2, res.net_f, &res.net_m);
        r["epoch"] = cfg.K2;
        r["loss"] = empirical_loss_j2(res.net_f, res.net_m, ue_star,
                                      sample_collocation(cfg, cfg.collocation, sample_rng, cfg.K2, data),
                                      cfg.coefficients, cfg.lambda_weight, nullptr, nullptr, cfg.boundary_derivative)
                        .total();
        report(opts, r);
        res.eval_log.push_back(std::move(r));
    }
    return res;
}

}  // namespace fdot
