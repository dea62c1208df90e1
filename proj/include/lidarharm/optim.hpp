#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lidarharm/params.hpp"

namespace lidarharm {

struct ScheduleConfig {
    double lr_max = 1e-3;
    double lr_min = 1e-7;
    double peak_decay = 0.2; ///< fraction removed from the peak after every epoch
};

/// Peak of epoch `epoch`: lr_max * (1 - peak_decay)^epoch, floored at lr_min.
double cyclical_peak(int epoch, const ScheduleConfig& config);

/// Triangular cycle per epoch: lr_min at step 0, the epoch's peak at
/// mid-epoch, back toward lr_min at the end.
double cyclical_lr(int epoch, std::size_t step, std::size_t steps_per_epoch, const ScheduleConfig& config);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. A non-finite gradient throws Error
/// naming the block and coordinate, leaving params and state untouched.
void adam_step(ParamSet& params, std::span<const double> grad, double lr, AdamState& state,
               const AdamConfig& config = {});

} // namespace lidarharm
