#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dm {

enum class LossTag { CCE, MAE, MSE, GCE };

// One of the four reference losses. q applies to GCE only; 0.7 is the
// default when a config leaves it unset.
struct LossKind {
    LossTag tag = LossTag::CCE;
    double q = 0.7;

    static LossKind cce() { return {LossTag::CCE, 0.0}; }
    static LossKind mae() { return {LossTag::MAE, 0.0}; }
    static LossKind mse() { return {LossTag::MSE, 0.0}; }
    static LossKind gce(double q = 0.7) { return {LossTag::GCE, q}; }
};

std::string loss_name(LossKind kind);

// Stable softmax (max-subtraction). Throws std::invalid_argument on
// non-finite input or fewer than 2 entries.
std::vector<double> softmax(const std::vector<double>& logits);

// Gradient of p_y w.r.t. the logits: p_y(1-p_y) at y, -p_y p_j elsewhere.
std::vector<double> softmax_grad_target(const std::vector<double>& probs, std::size_t y);

// Loss as a function of the target-class probability.
double loss_value(LossKind kind, double p_target);

// Closed-form per-example logit gradient of the loss.
std::vector<double> grad_logits(LossKind kind, const std::vector<double>& probs, std::size_t y);

// L1 norm of grad_logits as a closed form of p_target:
//   CCE 2(1-p), MAE 2p(1-p), MSE 4p(1-p)^2, GCE 2p^q(1-p).
double weight_magnitude(LossKind kind, double p_target);

}  // namespace dm
