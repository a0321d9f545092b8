#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dm/core_math.hpp"

namespace dm {

enum class EdfTag { ND, ED, BD, Unified, FromLoss };

// A raw (unnormalized) weighting family over p in [0,1].
//   ND(psi, beta)     exp(-beta p (p - 2 psi))
//   ED(beta)          exp(beta (1 - p))
//   BD(alpha, eta)    p^(alpha-1) (1-p)^(eta-1)
//   Unified(lam,beta) exp(beta p^lam (1 - p))
//   FromLoss(kind)    the loss's closed-form derivative magnitude
struct EdfFamily {
    EdfTag tag = EdfTag::Unified;
    double psi = 0.0;
    double beta = 0.0;
    double alpha = 1.0;
    double eta = 1.0;
    double lambda = 0.0;
    LossKind loss;

    static EdfFamily nd(double psi, double beta);
    static EdfFamily ed(double beta);
    static EdfFamily bd(double alpha, double eta);
    static EdfFamily unified(double lambda, double beta);
    static EdfFamily from_loss(LossKind kind);

    std::string name() const;
};

// Raw family value at p; clamps p into [1e-9, 1-1e-9] for BD families that
// are singular at an endpoint. clamped, when given, is set iff a clamp fired.
double edf_raw(const EdfFamily& family, double p, bool* clamped = nullptr);

// Quadrature constant Z = integral of edf_raw over [0,1], composite Simpson
// with n_points samples (odd, >= 101). Throws on a non-finite sample.
double normalizer(const EdfFamily& family, int n_points);

// Frozen normalized family: raw weight plus its quadrature constant.
struct Edf {
    EdfFamily family;
    double Z = 1.0;
    int grid_resolution = 0;

    static Edf make(const EdfFamily& family, int n_points = 10001);
    double normalized(double p) const { return edf_raw(family, p) / Z; }
};

// Mode of the unified family: lambda / (lambda + 1).
double emphasis_mode_analytic(double lambda);

// argmax of edf_raw over a uniform grid on [0,1]; ties go to the smaller p.
double emphasis_mode_numeric(const EdfFamily& family, int grid);

// Population variance of a batch's weights.
double emphasis_variance(std::span<const double> weights);

// DM scaled logit gradient: CCE's direction with L1 norm h(p_y).
std::vector<double> dm_grad_logits(const std::vector<double>& probs, std::size_t y,
                                   const Edf& edf, bool* saturated = nullptr);

// 1/Z for the loss-derived weighting family (the DN training constant).
double dn_scale(LossKind kind);

}  // namespace dm
