#pragma once

#include <cstdint>
#include <vector>

#include "lidarharm/pointcloud.hpp"

namespace lidarharm {

/// Area proportions of the three reflectance classes.
struct FeatureMix {
    double ground = 0.6;
    double building = 0.25;
    double vegetation = 0.15;
};

struct SceneSpec {
    std::uint64_t seed = 42;
    double x_size = 160.0; ///< meters
    double y_size = 60.0;  ///< meters
    double density = 8.0;  ///< points per square meter
    int n_strips = 4;
    double strip_overlap = 0.3; ///< fraction of strip width shared with the neighbor
    double strip_width = 0.0;   ///< 0 = fit the strips exactly to x_size
    double jitter = 0.02;       ///< sigma of positional noise on overlap copies, meters
    FeatureMix mix;
    double correlation_length = 4.0; ///< spatial scale of the reflectance field, meters
    double nugget = 0.05;            ///< share of per-point (spatially white) variance
};

void validate(const SceneSpec& spec);

enum class SurfaceClass : std::uint8_t { ground, building, vegetation };

struct ClassRange {
    double alpha, beta; ///< Beta shape parameters
    double lo, hi;      ///< scaled support
};

/// Reflectance distribution per class: Beta(alpha, beta) scaled to [lo, hi].
ClassRange class_range(SurfaceClass c);

/// Ground-truth world cloud. Deterministic in the spec; scan_id 0.
Scan generate_world(const SceneSpec& spec);

/// x-interval covered by strip j.
struct StripLayout {
    double width = 0.0;
    double step = 0.0;
    std::vector<std::pair<double, double>> ranges;
};

StripLayout strip_layout(const SceneSpec& spec);

/// Flight strips along x. Points covered by more than one strip are copied
/// into each with independent Gaussian positional jitter; scan ids are
/// 0..n_strips-1.
std::vector<Scan> cut_strips(const Scan& world, const SceneSpec& spec);

} // namespace lidarharm
