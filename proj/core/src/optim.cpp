#include "dm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dm {

void OptimizerSpec::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("optimizer: lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
    if (kind == OptimKind::Momentum || kind == OptimKind::Nesterov)
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("optimizer: momentum must be in [0,1)");
    if (kind == OptimKind::Adam) {
        if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
            throw std::invalid_argument("optimizer: adam betas must be in [0,1)");
        if (!(adam_delta > 0.0)) throw std::invalid_argument("optimizer: adam_delta must be > 0");
    }
}

void LrSchedule::validate() const {
    if (kind == LrScheduleKind::StepDecay) {
        for (std::size_t i = 1; i < milestones.size(); ++i)
            if (milestones[i] <= milestones[i - 1])
                throw std::invalid_argument("schedule: milestones must be strictly increasing");
        if (!(factor > 0.0 && factor < 1.0))
            throw std::invalid_argument("schedule: factor must be in (0,1)");
    }
    if (kind == LrScheduleKind::Inv)
        if (!(gamma > 0.0) || !(power > 0.0))
            throw std::invalid_argument("schedule: gamma and power must be > 0");
}

double lr_at(const LrSchedule& schedule, double base_lr, std::uint64_t iter) {
    switch (schedule.kind) {
        case LrScheduleKind::Constant:
            return base_lr;
        case LrScheduleKind::StepDecay: {
            double lr = base_lr;
            for (std::uint64_t m : schedule.milestones)
                if (iter >= m) lr *= schedule.factor;
            return lr;
        }
        case LrScheduleKind::Inv:
            return base_lr * std::pow(1.0 + schedule.gamma * static_cast<double>(iter),
                                      -schedule.power);
    }
    return base_lr;
}

OptimizerState make_optimizer(const OptimizerSpec& spec, std::size_t param_count) {
    spec.validate();
    OptimizerState state;
    if (spec.kind == OptimKind::Momentum || spec.kind == OptimKind::Nesterov)
        state.velocity.assign(param_count, 0.0);
    if (spec.kind == OptimKind::Adam) {
        state.m1.assign(param_count, 0.0);
        state.m2.assign(param_count, 0.0);
    }
    return state;
}

void step(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
          std::span<const double> grads, double lr) {
    if (params.size() != grads.size())
        throw std::invalid_argument("step: params/grads shape mismatch");
    std::size_t n = params.size();
    double wd = spec.weight_decay;

    switch (spec.kind) {
        case OptimKind::SGD:
            for (std::size_t i = 0; i < n; ++i)
                params[i] -= lr * (grads[i] + wd * params[i]);
            break;
        case OptimKind::Momentum: {
            if (state.velocity.size() != n) throw std::invalid_argument("step: state shape mismatch");
            double mu = spec.momentum;
            for (std::size_t i = 0; i < n; ++i) {
                double g = grads[i] + wd * params[i];
                state.velocity[i] = mu * state.velocity[i] + g;
                params[i] -= lr * state.velocity[i];
            }
            break;
        }
        case OptimKind::Nesterov: {
            if (state.velocity.size() != n) throw std::invalid_argument("step: state shape mismatch");
            double mu = spec.momentum;
            for (std::size_t i = 0; i < n; ++i) {
                double g = grads[i] + wd * params[i];
                state.velocity[i] = mu * state.velocity[i] + g;
                params[i] -= lr * (g + mu * state.velocity[i]);
            }
            break;
        }
        case OptimKind::Adam: {
            if (state.m1.size() != n) throw std::invalid_argument("step: state shape mismatch");
            double b1 = spec.adam_beta1;
            double b2 = spec.adam_beta2;
            state.step_count += 1;
            double t = static_cast<double>(state.step_count);
            double c1 = 1.0 - std::pow(b1, t);
            double c2 = 1.0 - std::pow(b2, t);
            for (std::size_t i = 0; i < n; ++i) {
                double g = grads[i] + wd * params[i];
                state.m1[i] = b1 * state.m1[i] + (1.0 - b1) * g;
                state.m2[i] = b2 * state.m2[i] + (1.0 - b2) * g * g;
                double mhat = state.m1[i] / c1;
                double vhat = state.m2[i] / c2;
                params[i] -= lr * mhat / (std::sqrt(vhat) + spec.adam_delta);
            }
            break;
        }
    }
}

}  // namespace dm
