#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dm/rng.hpp"

namespace dm {

enum class Activation { ReLU, Tanh };

// Feedforward classifier with explicit parameter storage for manual
// backprop. All weights and biases live in one contiguous buffer, layer by
// layer (W row-major out x in, then b), so optimizers and checkpoints can
// treat the parameters as a flat vector. The final layer is linear and
// outputs logits.
struct Mlp {
    std::vector<std::size_t> layer_dims;  // [D, h1, ..., C]
    Activation activation = Activation::ReLU;
    double dropout_rate = 0.0;
    std::vector<double> theta;

    std::size_t layer_count() const { return layer_dims.size() - 1; }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t class_count() const { return layer_dims.back(); }

    std::size_t weight_offset(std::size_t layer) const;
    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> bias(std::size_t layer);
    std::span<const double> bias(std::size_t layer) const;
};

// Per-batch forward state kept for the backward pass.
struct ForwardCache {
    std::size_t batch = 0;
    bool train_mode = false;
    std::vector<std::vector<double>> inputs;       // layer inputs a_0..a_{L-1}
    std::vector<std::vector<double>> pre;          // pre-activations s_1..s_L
    std::vector<std::vector<double>> masks;        // dropout masks per hidden layer
    std::vector<double> logits;                    // batch x C
    std::vector<std::vector<double>> probs;        // softmax per example
};

// Glorot-uniform weights, zero biases; bit-determined by seed.
Mlp init_mlp(const std::vector<std::size_t>& layer_dims, Activation activation,
             double dropout_rate, std::uint64_t seed);

// features: batch x input_dim row-major. Dropout (inverted scaling) is
// applied to hidden activations in train mode only; masks come from
// dropout_rng so reruns are bit-identical.
ForwardCache forward(const Mlp& net, std::span<const double> features, std::size_t batch,
                     bool train_mode, Rng dropout_rng);

// Reverse-mode parameter gradients given d(objective)/d(logits); returns a
// buffer in theta layout. Batch reduction is the mean over examples.
std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> logit_grads);

struct Prediction {
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> probs;
};

// Eval-mode argmax prediction; ties go to the smallest class index.
Prediction predict(const Mlp& net, std::span<const double> features, std::size_t batch);

// Flat binary checkpoint: magic "DMF1", u32 dim count, u32 dims, f64 theta.
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path, Activation activation = Activation::ReLU,
                    double dropout_rate = 0.0);

}  // namespace dm
