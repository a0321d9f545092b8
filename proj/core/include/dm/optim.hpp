#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dm {

enum class OptimKind { SGD, Momentum, Nesterov, Adam };

struct OptimizerSpec {
    OptimKind kind = OptimKind::SGD;
    double lr = 0.01;
    double momentum = 0.9;       // Momentum / Nesterov
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_delta = 1e-8;    // denominator stabilizer
    double weight_decay = 0.0;   // coupled L2, added to the gradient

    void validate() const;  // throws std::invalid_argument on bad fields
};

enum class LrScheduleKind { Constant, StepDecay, Inv };

struct LrSchedule {
    LrScheduleKind kind = LrScheduleKind::Constant;
    std::vector<std::uint64_t> milestones;  // StepDecay, strictly increasing
    double factor = 0.1;                    // StepDecay, in (0,1)
    double gamma = 1e-5;                    // Inv
    double power = 0.75;                    // Inv

    void validate() const;
};

double lr_at(const LrSchedule& schedule, double base_lr, std::uint64_t iter);

// Velocity / moment buffers mirroring the flat parameter vector.
struct OptimizerState {
    std::vector<double> velocity;   // Momentum / Nesterov
    std::vector<double> m1, m2;     // Adam moments
    std::uint64_t step_count = 0;
};

OptimizerState make_optimizer(const OptimizerSpec& spec, std::size_t param_count);

// One update in place; lr is the already-scheduled rate for this iteration.
void step(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
          std::span<const double> grads, double lr);

}  // namespace dm
