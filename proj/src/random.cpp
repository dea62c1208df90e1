#include "lidarharm/random.hpp"

#include <cmath>
#include <numbers>

namespace lidarharm {

double standard_normal(Rng& rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0)
        u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t poisson(Rng& rng, double mean)
{
    if (mean <= 0.0)
        return 0;
    if (mean > 1e4) {
        const double v = std::round(mean + std::sqrt(mean) * standard_normal(rng));
        return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
    }
    // Knuth, in log space chunks to avoid underflow for moderate means.
    std::uint64_t k = 0;
    double remaining = mean;
    double p = 1.0;
    constexpr double step = 500.0;
    for (;;) {
        ++k;
        p *= uniform01(rng);
        while (p < 1.0 && remaining > 0.0) {
            if (remaining > step) {
                p *= std::exp(step);
                remaining -= step;
            } else {
                p *= std::exp(remaining);
                remaining = 0.0;
            }
        }
        if (p <= 1.0 && remaining <= 0.0)
            break;
    }
    return k - 1;
}

} // namespace lidarharm
