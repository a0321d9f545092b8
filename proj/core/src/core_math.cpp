#include "dm/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dm {

namespace {
constexpr double kLogGuard = 1e-12;

void check_target(const std::vector<double>& probs, std::size_t y) {
    if (probs.size() < 2) throw std::invalid_argument("probs: need at least 2 classes");
    if (y >= probs.size()) throw std::out_of_range("target class index out of range");
}
}  // namespace

std::string loss_name(LossKind kind) {
    switch (kind.tag) {
        case LossTag::CCE: return "CCE";
        case LossTag::MAE: return "MAE";
        case LossTag::MSE: return "MSE";
        case LossTag::GCE: return "GCE(q=" + std::to_string(kind.q) + ")";
    }
    return "?";
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.size() < 2) throw std::invalid_argument("softmax: need at least 2 logits");
    for (double z : logits)
        if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");

    double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - zmax);
        denom += out[j];
    }
    for (double& p : out) p /= denom;
    return out;
}

std::vector<double> softmax_grad_target(const std::vector<double>& probs, std::size_t y) {
    check_target(probs, y);
    double py = probs[y];
    std::vector<double> g(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = (j == y) ? py * (1.0 - py) : -py * probs[j];
    return g;
}

double loss_value(LossKind kind, double p) {
    switch (kind.tag) {
        case LossTag::CCE: return -std::log(std::max(p, kLogGuard));
        case LossTag::MAE: return 1.0 - p;
        case LossTag::MSE: return (1.0 - p) * (1.0 - p);
        case LossTag::GCE: return (1.0 - std::pow(p, kind.q)) / kind.q;
    }
    return 0.0;
}

std::vector<double> grad_logits(LossKind kind, const std::vector<double>& probs, std::size_t y) {
    check_target(probs, y);
    double py = probs[y];

    // Scale relative to the CCE gradient (shared direction).
    double scale = 1.0;
    switch (kind.tag) {
        case LossTag::CCE: scale = 1.0; break;
        case LossTag::MAE: scale = py; break;
        case LossTag::MSE: scale = 2.0 * py * (1.0 - py); break;
        case LossTag::GCE: scale = std::pow(py, kind.q); break;
    }

    std::vector<double> g(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = scale * ((j == y) ? py - 1.0 : probs[j]);
    return g;
}

double weight_magnitude(LossKind kind, double p) {
    switch (kind.tag) {
        case LossTag::CCE: return 2.0 * (1.0 - p);
        case LossTag::MAE: return 2.0 * p * (1.0 - p);
        case LossTag::MSE: return 4.0 * p * (1.0 - p) * (1.0 - p);
        case LossTag::GCE: return 2.0 * std::pow(p, kind.q) * (1.0 - p);
    }
    return 0.0;
}

}  // namespace dm
