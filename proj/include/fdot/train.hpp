#pragma once

#include "fdot/config.hpp"
#include "fdot/losses.hpp"
#include "fdot/mlp.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace fdot {

/// Raised when a gradient or loss turns non-finite during training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update. Throws TrainingError on a non-finite gradient without touching state.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad, double rate);

/// Step decay: rate(e) = initial * factor^floor(e / interval).
struct Schedule {
    double initial = 1e-3;
    double factor = 0.1;
    int interval = 20000;

    Schedule() = default;
    Schedule(double initial, double factor, int interval);
    explicit Schedule(const ScheduleSpec& s) : Schedule(s.initial, s.decay_factor, s.decay_interval) {}
    double rate(int epoch) const;
};

/// Scales all gradient blocks so their joint Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::span<std::vector<double>* const> grads, double max_norm);

constexpr double kClipNorm = 1e3;

struct TrainOptions {
    /// Called every `cfg.eval_interval` epochs and after the last one; returned records go to the eval log.
    std::function<Record(int epoch, const Mlp& net_a, const Mlp* net_b)> evaluate;
    std::ostream* progress = nullptr;  ///< one line per eval, if set
};

struct ExcitationResult {
    Mlp net;
    std::vector<Record> log;
    std::vector<Record> eval_log;
};

struct InverseResult {
    Mlp net_f;
    Mlp net_m;
    std::vector<Record> log;
    std::vector<Record> eval_log;
};

/// Training log column order.
std::vector<std::string> log_columns();

/// Algorithm for the direct problem: K1 epochs of resampling, gradient of J1 and Adam.
ExcitationResult train_excitation(const ExperimentConfig& cfg, const TrainOptions& opts = {});

/// Algorithm for the inverse problem: K2 epochs of joint (mu_f, u_m) updates on J2.
InverseResult train_inverse(const ExperimentConfig& cfg, const Mlp& ue_star, const std::vector<MeasurementSample>& data,
                            const TrainOptions& opts = {});

}  // namespace fdot
