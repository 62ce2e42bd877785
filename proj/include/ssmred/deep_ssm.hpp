#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssmred/lru.hpp"

namespace ssmred {

enum class NonlinearityKind { MLP, GLU };
enum class NormKind { LayerNorm, None };

std::string_view to_string(NonlinearityKind k);
std::string_view to_string(NormKind k);
NonlinearityKind parse_nonlinearity(std::string_view s);
NormKind parse_norm(std::string_view s);

struct DeepSsmConfig {
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    std::size_t d_model = 8;
    std::size_t n_x = 12;
    std::size_t n_layers = 2;
    NonlinearityKind nonlinearity = NonlinearityKind::MLP;
    std::size_t mlp_hidden = 16;
    NormKind norm = NormKind::LayerNorm;
    std::size_t n_skip_loss = 0;
    LruInit lru_init{};

    void validate() const;
};

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormParams {
    RVector gain;  // empty when the norm is disabled
    RVector bias;
};

/// MLP: W2 GELU(W1 v + b1) + b2 (W1 hidden x d, W2 d x hidden).
/// GLU: (W1 v + b1) .* sigmoid(W2 v + b2) (both d x d).
struct StaticBlock {
    RMatrix W1;
    RVector b1;
    RMatrix W2;
    RVector b2;
};

struct Layer {
    LayerNormParams norm;
    LruParams lru;
    StaticBlock f;
};

struct DeepSsm {
    DeepSsmConfig config;
    RMatrix W_in;  // d_model x n_in
    RVector b_in;
    std::vector<Layer> layers;
    RMatrix W_out;  // n_out x d_model
    RVector b_out;

    /// Same shapes, all parameters zero. Used as a gradient container.
    DeepSsm zeros_like() const;
};

DeepSsm init_deep_ssm(const DeepSsmConfig& cfg, std::mt19937_64& rng);

double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

/// (v - mean(v)) / sqrt(var(v) + 1e-5) .* gain + bias, population variance.
RVector layer_norm(const RVector& v, const RVector& gain, const RVector& bias);

RVector mlp_gelu(const StaticBlock& f, const RVector& v);
RVector glu(const StaticBlock& f, const RVector& v);

/// Sequences are stored one column per time step.
RMatrix layer_forward(const Layer& layer, const DeepSsmConfig& cfg, const RMatrix& u);
RMatrix forward(const DeepSsm& m, const RMatrix& u);

struct LayerTape {
    RMatrix u;       // layer input
    RMatrix xhat;    // normalized, before gain/bias
    RVector inv_std;
    RMatrix u_norm;  // LRU input
    CMatrix X;       // LRU states
    RMatrix y;       // LRU output
    RMatrix a;       // W1 y + b1
    RMatrix g;       // GLU gate pre-activation, W2 y + b2
};

struct ForwardTape {
    RMatrix u;
    std::vector<LayerTape> layers;
    RMatrix s_last;
};

RMatrix forward(const DeepSsm& m, const RMatrix& u, ForwardTape& tape);

/// Reverse pass: accumulates dL/dtheta into grad given dL/dy_hat. Complex
/// parameters receive (dL/dRe, dL/dIm) packed as a complex number.
void backward(const DeepSsm& m, const ForwardTape& tape, const RMatrix& y_bar, DeepSsm& grad);

/// Visits every learnable parameter group as a flat span of doubles. Complex
/// matrices are exposed as interleaved (re, im) pairs.
struct ParamGroup {
    std::string name;
    std::span<double> values;
    bool weight_decay;
};

std::vector<ParamGroup> parameter_groups(DeepSsm& m);
std::size_t parameter_count(const DeepSsm& m);
std::vector<double> flatten(const DeepSsm& m);
void unflatten(DeepSsm& m, std::span<const double> values);

}  // namespace ssmred
