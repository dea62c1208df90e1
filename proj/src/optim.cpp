#include "lidarharm/optim.hpp"

#include <algorithm>
#include <cmath>

#include "lidarharm/error.hpp"

namespace lidarharm {

double cyclical_peak(int epoch, const ScheduleConfig& c)
{
    return std::max(c.lr_min, c.lr_max * std::pow(1.0 - c.peak_decay, epoch));
}

double cyclical_lr(int epoch, std::size_t step, std::size_t steps_per_epoch, const ScheduleConfig& c)
{
    if (steps_per_epoch == 0 || step >= steps_per_epoch)
        throw DomainError("cyclical_lr: step outside the epoch");
    const double peak = cyclical_peak(epoch, c);
    const double x = static_cast<double>(step) / static_cast<double>(steps_per_epoch);
    const double tri = 1.0 - std::abs(2.0 * x - 1.0);
    // Weighted form hits both endpoints exactly.
    return peak * tri + c.lr_min * (1.0 - tri);
}

void adam_step(ParamSet& params, std::span<const double> grad, double lr, AdamState& state, const AdamConfig& config)
{
    const auto values = params.values();
    if (grad.size() != values.size() || state.m.size() != values.size() || state.v.size() != values.size())
        throw DomainError("adam_step: gradient/state shape does not match parameters");
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            std::size_t b = 0;
            while (b + 1 < params.layout().size() && params.offset(b + 1) <= i)
                ++b;
            throw Error("non-finite gradient in block '" + params.layout()[b].name + "' at element " +
                        std::to_string(i - params.offset(b)));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

} // namespace lidarharm
