#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lidarharm/pointcloud.hpp"
#include "lidarharm/random.hpp"
#include "lidarharm/response.hpp"
#include "lidarharm/spatial_index.hpp"

namespace lidarharm {

/// One neighbor, relative to the query location.
struct NeighborFeature {
    float dx = 0.0f, dy = 0.0f, dz = 0.0f;
    float intensity = 0.0f; ///< corrupted intensity as recorded by the source
    friend bool operator==(const NeighborFeature&, const NeighborFeature&) = default;
};

/// A source neighborhood relative to a target location, with the
/// interpolation ground truth (source calibration) and the harmonization
/// ground truth (target calibration).
struct Example {
    std::vector<NeighborFeature> neighbors; ///< ascending by distance
    std::uint16_t source_id = 0;
    std::uint16_t target_id = 0;
    float gt_interp = 0.0f;
    float gt_harm = 0.0f;
    float x_norm = 0.0f;
    friend bool operator==(const Example&, const Example&) = default;
};

using ScanPair = std::pair<std::uint16_t, std::uint16_t>; ///< (source, target)

enum class Split { train, val };

struct DatasetManifest {
    std::size_t example_count = 0;
    std::map<ScanPair, std::size_t> pair_counts;
    std::vector<std::size_t> bin_counts; ///< over gt_harm
    std::size_t k = 150;
    double radius = 1.0;
    std::size_t min_neighbors = 10;
    std::uint16_t target_id = 0;
    std::map<std::uint16_t, std::string> corruption; ///< scan id -> curve description
    bool shift = false;
    std::size_t train_count = 0; ///< examples [0, train_count) are train, the rest val
    std::size_t val_count = 0;
    std::uint16_t eval_source_id = 0;
    std::optional<Box2> eval_tile;
    std::size_t skipped_sparse = 0;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    std::uint64_t payload_checksum = 0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<Example> examples;

    std::span<const Example> train() const { return {examples.data(), manifest.train_count}; }
    std::span<const Example> val() const
    {
        return {examples.data() + manifest.train_count, examples.size() - manifest.train_count};
    }
};

struct OverlapPair {
    std::uint16_t source_id = 0;
    std::uint16_t target_id = 0;
    std::size_t overlap = 0; ///< target points with a source point within the radius
};

/// Pairs (s, target_id) with overlap >= min_overlap; throws
/// Error("insufficient overlap") when none qualify.
std::vector<OverlapPair> find_overlap_pairs(const std::vector<Scan>& scans, std::uint16_t target_id,
                                            std::size_t min_overlap, double radius = 1.0, int threads = 1);

struct NeighborhoodOptions {
    std::size_t k = 150;
    double radius = 1.0;
    std::size_t min_neighbors = 10;
};

struct BuildResult {
    std::vector<Example> examples;
    std::size_t skipped_sparse = 0;
};

/// Examples at `target_points` of the target scan, whose intensities are the
/// harmonization ground truth. Neighborhoods come from the corrupted source
/// and the interpolation ground truth is source_curve(Ĥ).
BuildResult build_overlap_examples(const Scan& target, const SpatialIndex& source_corrupted,
                                   const ResponseFunction& source_curve, std::span<const std::size_t> target_points,
                                   const NeighborhoodOptions& options, const XExtent& extent, int threads = 1);

/// Within-scan examples: the center point is removed from its own
/// neighborhood and Î = Ĥ = its corrupted intensity; source = target id.
BuildResult build_inscan_examples(const SpatialIndex& scan_corrupted, std::span<const std::size_t> centers,
                                  const NeighborhoodOptions& options, const XExtent& extent, int threads = 1);

inline std::size_t intensity_bin(float value, std::size_t n_bins)
{
    const auto b = static_cast<std::size_t>(std::max(0.0f, value) * static_cast<float>(n_bins));
    return std::min(b, n_bins - 1);
}

struct ResampleResult {
    std::vector<Example> examples;
    std::vector<std::string> warnings; ///< one per empty (pair, bin) cell
};

/// Balances examples per (source, target) pair and per Ĥ bin: every
/// non-empty cell ends with exactly per_bin_target examples, subsampled
/// without replacement when long and topped up with replacement when short.
ResampleResult stratified_resample(std::span<const Example> examples, std::size_t n_bins,
                                   std::size_t per_bin_target, Rng& rng);

/// Recomputes per-pair and per-bin counts.
void recount(DatasetManifest& manifest, std::span<const Example> examples, std::size_t n_bins);

/// Binary layout: "LHD1", u16 version, u64 count, u32 manifest length +
/// manifest JSON text, then per example: u16 source, u16 target, u16 n,
/// n x (f32 dx, dy, dz, i), f32 gt_interp, f32 gt_harm, f32 x_norm.
std::vector<char> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const char> bytes);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

} // namespace lidarharm
