#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarharm/spatial_index.hpp"
#include "lidarharm/train.hpp"

namespace lidarharm {

enum class InterpMethod { nearest, linear, cubic };

/// "nearest" | "linear" | "cubic".
InterpMethod parse_interp_method(std::string_view name);
std::string to_string(InterpMethod method);

struct InterpResult {
    double value = 0.0;
    bool fallback = false; ///< cubic system singular, inverse-distance value used instead
};

inline constexpr double kDistanceFloor = 1e-9;

/// Scattered-data interpolation of neighbor intensities at `loc`.
///   nearest: value of the closest neighbor (lowest index on ties)
///   linear:  inverse-distance weights d^-2
///   cubic:   radial basis phi(r) = r^3 plus a constant term, clamped to [0, 1]
/// A neighbor closer than kDistanceFloor returns its own value exactly.
InterpResult interpolate(InterpMethod method, std::span<const Vec3> positions, std::span<const double> values,
                         const Vec3& loc);

/// Same, on neighbor offsets relative to the query (query at the origin).
InterpResult interpolate(InterpMethod method, std::span<const NeighborFeature> neighbors);

struct AffineHead {
    double a = 1.0;
    double b = 0.0;
    double apply(double i) const { return a * i + b; }
};

/// Least squares H = a I + b. Throws DomainError on fewer than two pairs or
/// constant I.
AffineHead fit_affine(std::span<const double> interp, std::span<const double> harm);

struct HeadPair {
    double interp = 0.0;
    double harm = 0.0;
    std::uint16_t source_id = 0;
    std::uint16_t target_id = 0;
};

struct MlpHead {
    ParamSet params; ///< head_layout blocks
    std::vector<HistoryRow> history;
};

/// Trains the stand-alone harmonization head (embedding difference + 100
/// hidden units) on (I, H) pairs with the model's optimizer settings. Every
/// tenth pair is held out for validation. Throws DomainError below 100 pairs
/// and Error when training diverges.
MlpHead fit_mlp_head(std::span<const HeadPair> pairs, const TrainConfig& config, const ModelShape& shape = {},
                     int threads = 1);

/// Eval-mode head output for an interpolated intensity.
double apply_mlp_head(const ParamSet& head, double interp, std::uint16_t source_id, std::uint16_t target_id);

/// Monotone look-up table mapping source intensities to target quantiles,
/// sampled at n_bins bin centers of [0, 1].
struct HistMatchLUT {
    std::vector<double> centers;
    std::vector<double> values;
};

HistMatchLUT build_histmatch(std::span<const float> source, std::span<const float> target, std::size_t n_bins = 256);

/// Piecewise linear between bin centers, constant beyond the outer centers.
double apply_lut(const HistMatchLUT& lut, double i);

/// L1 distance between normalized n_bins histograms of two samples.
double histogram_distance(std::span<const float> a, std::span<const float> b, std::size_t n_bins = 256);

} // namespace lidarharm
