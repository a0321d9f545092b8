#include "dm/edf.hpp"

#include <cmath>
#include <stdexcept>

namespace dm {

namespace {
constexpr double kEndpointClamp = 1e-9;
constexpr double kSaturationGuard = 1e-12;
}  // namespace

EdfFamily EdfFamily::nd(double psi, double beta) {
    if (psi < 0.0) throw std::invalid_argument("ND: psi must be >= 0");
    EdfFamily f;
    f.tag = EdfTag::ND;
    f.psi = psi;
    f.beta = beta;
    return f;
}

EdfFamily EdfFamily::ed(double beta) {
    EdfFamily f;
    f.tag = EdfTag::ED;
    f.beta = beta;
    return f;
}

EdfFamily EdfFamily::bd(double alpha, double eta) {
    if (alpha < 0.0 || eta < 0.0) throw std::invalid_argument("BD: alpha, eta must be >= 0");
    EdfFamily f;
    f.tag = EdfTag::BD;
    f.alpha = alpha;
    f.eta = eta;
    return f;
}

EdfFamily EdfFamily::unified(double lambda, double beta) {
    if (lambda < 0.0) throw std::invalid_argument("Unified: lambda must be >= 0");
    EdfFamily f;
    f.tag = EdfTag::Unified;
    f.lambda = lambda;
    f.beta = beta;
    return f;
}

EdfFamily EdfFamily::from_loss(LossKind kind) {
    EdfFamily f;
    f.tag = EdfTag::FromLoss;
    f.loss = kind;
    return f;
}

std::string EdfFamily::name() const {
    switch (tag) {
        case EdfTag::ND:
            return "ND(psi=" + std::to_string(psi) + ",beta=" + std::to_string(beta) + ")";
        case EdfTag::ED: return "ED(beta=" + std::to_string(beta) + ")";
        case EdfTag::BD:
            return "BD(alpha=" + std::to_string(alpha) + ",eta=" + std::to_string(eta) + ")";
        case EdfTag::Unified:
            return "Unified(lambda=" + std::to_string(lambda) + ",beta=" + std::to_string(beta) + ")";
        case EdfTag::FromLoss: return "FromLoss(" + loss_name(loss) + ")";
    }
    return "?";
}

double edf_raw(const EdfFamily& family, double p, bool* clamped) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("edf_raw: p outside [0,1]");
    if (clamped) *clamped = false;
    switch (family.tag) {
        case EdfTag::ND:
            return std::exp(-family.beta * p * (p - 2.0 * family.psi));
        case EdfTag::ED:
            return std::exp(family.beta * (1.0 - p));
        case EdfTag::BD: {
            double pe = p;
            // p^(alpha-1) or (1-p)^(eta-1) is singular at an endpoint when the
            // exponent is negative; clamp into the open interval.
            if ((family.alpha < 1.0 && p < kEndpointClamp) ||
                (family.eta < 1.0 && p > 1.0 - kEndpointClamp)) {
                pe = std::min(std::max(p, kEndpointClamp), 1.0 - kEndpointClamp);
                if (clamped) *clamped = true;
            }
            return std::pow(pe, family.alpha - 1.0) * std::pow(1.0 - pe, family.eta - 1.0);
        }
        case EdfTag::Unified:
            return std::exp(family.beta * std::pow(p, family.lambda) * (1.0 - p));
        case EdfTag::FromLoss:
            return weight_magnitude(family.loss, p);
    }
    return 0.0;
}

double normalizer(const EdfFamily& family, int n_points) {
    if (n_points < 101 || n_points % 2 == 0)
        throw std::invalid_argument("normalizer: n_points must be odd and >= 101");
    double h = 1.0 / static_cast<double>(n_points - 1);
    double acc = 0.0;
    for (int i = 0; i < n_points; ++i) {
        double p = static_cast<double>(i) * h;
        double v = edf_raw(family, p);
        if (!std::isfinite(v))
            throw std::runtime_error("normalizer: non-finite integrand at p=" + std::to_string(p) +
                                     " for " + family.name());
        double c = (i == 0 || i == n_points - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += c * v;
    }
    double z = acc * h / 3.0;
    if (!(z > 0.0) || !std::isfinite(z))
        throw std::runtime_error("normalizer: non-positive quadrature constant for " + family.name());
    return z;
}

Edf Edf::make(const EdfFamily& family, int n_points) {
    Edf e;
    e.family = family;
    e.grid_resolution = n_points;
    e.Z = normalizer(family, n_points);
    return e;
}

double emphasis_mode_analytic(double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("emphasis_mode_analytic: lambda must be >= 0");
    return lambda / (lambda + 1.0);
}

double emphasis_mode_numeric(const EdfFamily& family, int grid) {
    if (grid < 1001) throw std::invalid_argument("emphasis_mode_numeric: grid must be >= 1001");
    double best_p = 0.0;
    double best_w = -1.0;
    for (int i = 0; i < grid; ++i) {
        double p = static_cast<double>(i) / static_cast<double>(grid - 1);
        double w = edf_raw(family, p);
        if (w > best_w) {  // strict: ties keep the smaller p
            best_w = w;
            best_p = p;
        }
    }
    return best_p;
}

double emphasis_variance(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("emphasis_variance: empty weight vector");
    double mean = 0.0;
    for (double w : weights) mean += w;
    mean /= static_cast<double>(weights.size());
    double var = 0.0;
    for (double w : weights) var += (w - mean) * (w - mean);
    return var / static_cast<double>(weights.size());
}

std::vector<double> dm_grad_logits(const std::vector<double>& probs, std::size_t y,
                                   const Edf& edf, bool* saturated) {
    if (y >= probs.size()) throw std::out_of_range("dm_grad_logits: target index out of range");
    if (saturated) *saturated = false;
    std::size_t c = probs.size();
    double py = probs[y];
    double h = edf.normalized(py);
    std::vector<double> g(c);
    double rest = 1.0 - py;
    if (rest < kSaturationGuard) {
        // p_y saturated: spread the non-target mass uniformly.
        if (saturated) *saturated = true;
        double off = (h / 2.0) / static_cast<double>(c - 1);
        for (std::size_t j = 0; j < c; ++j) g[j] = (j == y) ? -h / 2.0 : off;
        return g;
    }
    // Renormalized non-target distribution keeps the result finite as p_y -> 1
    // and makes the L1 norm exactly h.
    for (std::size_t j = 0; j < c; ++j)
        g[j] = (j == y) ? -h / 2.0 : (h / 2.0) * probs[j] / rest;
    return g;
}

double dn_scale(LossKind kind) {
    return 1.0 / normalizer(EdfFamily::from_loss(kind), 10001);
}

}  // namespace dm
