#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ssmred/deep_ssm.hpp"

namespace ssmred {

enum class RegKind { None, ModalL1, HankelNuclear, HankelL2 };

std::string_view to_string(RegKind k);
RegKind parse_reg_kind(std::string_view s);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t epochs = 10;
    std::size_t max_steps = 0;  // 0: run all epochs
    std::size_t batch_size = 64;
    std::size_t subseq_len = 5000;
    double overlap = 0.0;
    double reg_strength = 0.0;
    RegKind reg_kind = RegKind::None;
    std::size_t n_skip = 200;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One input/output record, one column per time step.
struct Sequence {
    RMatrix u;
    RMatrix y;
};

using Batch = std::vector<Sequence>;

/// Mean over steps k >= n_skip and channels of (y - y_hat)^2.
double mse_loss(const RMatrix& y, const RMatrix& y_hat, std::size_t n_skip);

double reg_modal_l1(const DeepSsm& m);
double reg_hankel_nuclear(const DeepSsm& m);
double reg_hankel_l2(const DeepSsm& m);
double regularizer(const DeepSsm& m, RegKind kind);

inline constexpr double kSigmaFloor = 1e-9;

/// Sum of Hankel singular values of one LRU and its exact gradient with
/// respect to (nu, phi, B_tilde, C); D gets zero. Singular values below
/// kSigmaFloor contribute no gradient. Throws ClusteredSpectrum when a
/// contributing eigenvalue of PQ is not separated by 1e-10 (relative).
struct LruRegGradient {
    double value = 0.0;
    LruParams grad;
};
LruRegGradient hankel_sv_gradients(const LruParams& p);

/// trace(PQ) of one LRU and its gradient.
LruRegGradient hankel_trace_gradients(const LruParams& p);

/// Regularizer gradient accumulated into grad (scaled by weight). Blocks with
/// a clustered spectrum fall back to central differences.
double accumulate_regularizer_gradient(const DeepSsm& m, RegKind kind, double weight, DeepSsm& grad);

struct LossBreakdown {
    double total = 0.0;
    double mse = 0.0;
    double reg = 0.0;
};

/// mean MSE over the batch (after n_skip) + reg_strength * R(theta).
LossBreakdown total_loss(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg);

/// Exact gradient of total_loss. Throws NonFiniteLoss on NaN/Inf.
LossBreakdown gradients(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg, DeepSsm& grad);

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

struct AdamWHyper {
    double learning_rate = 1e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Decoupled-weight-decay Adam. Decay is skipped for nu, phi, and norm
/// parameters.
void adamw_step(DeepSsm& params, const DeepSsm& grads, AdamWState& state, const AdamWHyper& hyper);

/// Start offsets of length-N windows with stride max(1, floor(N (1 - overlap))).
std::vector<std::size_t> window_starts(std::size_t length, std::size_t N, double overlap);

/// One epoch of shuffled windows grouped into batches (the last batch may be
/// smaller). Throws SequenceTooShort if any sequence is shorter than N.
std::vector<Batch> make_subsequences(const std::vector<Sequence>& data, std::size_t N, double overlap,
                                     std::size_t batch_size, std::uint64_t seed);

struct StepLog {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
    double mse = 0.0;
    double reg = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    AdamWState optimizer;
    std::vector<StepLog> log;
};

/// `start` resumes the optimizer moments and step count of an earlier run.
TrainResult train(DeepSsm& m, const std::vector<Sequence>& data, const TrainConfig& cfg,
                  const std::function<void(const StepLog&)>& on_step = {}, AdamWState start = {});

struct GroupCheck {
    std::string name;
    double rel_error = 0.0;
    double analytic_norm = 0.0;
};

struct GradCheckReport {
    std::vector<GroupCheck> groups;
    double worst_rel_error = 0.0;
    std::string worst_group;
};

/// Compares gradients() with central differences of total_loss, per group:
/// ||g_analytic - g_fd|| / max(||g_analytic||, ||g_fd||).
GradCheckReport gradient_check(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg,
                               double eps = 1e-5);

}  // namespace ssmred
