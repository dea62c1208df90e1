#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarharm/baselines.hpp"
#include "lidarharm/dataset.hpp"
#include "lidarharm/train.hpp"

namespace lidarharm {

/// Mean of |pred_i - gt_i|. Throws DomainError on empty or unequal inputs.
double mae(std::span<const double> pred, std::span<const double> gt);
double mae(std::span<const float> pred, std::span<const float> gt);

/// Points of `scan` lying within `radius` of any point of `others`.
std::vector<bool> overlap_regions(const Scan& scan, std::span<const Scan> others, double radius, int threads = 1);

/// Square tile_size x tile_size box inside the scan's footprint that contains
/// no overlap-flagged point. Candidates lie on a 0.5 m grid; one is drawn
/// with `seed`. Throws Error when no candidate qualifies.
Box2 extract_eval_tile_box(const Scan& scan, const std::vector<bool>& overlap, double tile_size, std::uint64_t seed);

/// Indices of the points inside `box`, ascending.
std::vector<std::size_t> points_in_box(const Scan& scan, const Box2& box);

/// The points of `scan` inside the tile returned by extract_eval_tile_box.
Scan extract_eval_tile(const Scan& scan, const std::vector<bool>& overlap, double tile_size, std::uint64_t seed);

/// Throws Error if any overlap-flagged point falls inside `tile`.
void assert_tile_disjoint(const Scan& scan, const std::vector<bool>& overlap, const Box2& tile);

/// Inputs for one dataset column of the benchmark.
struct BenchmarkVariant {
    std::string name; ///< "noshift" or "shift"
    const Scan* source_corrupted = nullptr;
    const Scan* source_truth = nullptr; ///< same points, harmonized truth
    const Scan* target_reference = nullptr; ///< target scan as recorded, for histogram matching
    std::span<const Example> examples;     ///< pairs for fitting the heads
    const ParamSet* model = nullptr;
    Box2 tile;
    std::vector<bool> overlap; ///< overlap flags of the source, for the disjointness check
};

struct BenchmarkOptions {
    std::uint16_t target_id = 1;
    std::size_t k = 5;
    double radius = 1.0;
    std::size_t hist_bins = 256;
    TrainConfig head_train;
    ModelShape shape;
    int threads = 1;
};

struct BenchmarkCell {
    std::string interpolation;
    std::string harmonization;
    std::string dataset;
    double mae = 0.0;
    std::size_t skipped = 0;
};

struct BenchmarkReport {
    std::vector<BenchmarkCell> cells;
    std::map<std::string, std::string> metadata; ///< flat key -> value, JSON-ready
};

/// Method rows in report order: (interpolation, harmonization).
std::vector<std::pair<std::string, std::string>> benchmark_rows();

/// Harmonizes each variant's evaluation tile with every method and scores it
/// against the truth. All methods see the same tile points and the same
/// k-neighborhoods in the corrupted source (each point included in its own).
BenchmarkReport run_benchmark(std::span<const BenchmarkVariant> variants, const BenchmarkOptions& options,
                              const LogFn& log = {});

const BenchmarkCell& find_cell(const BenchmarkReport& report, std::string_view interpolation,
                               std::string_view harmonization, std::string_view dataset);

/// `interpolation,harmonization,dataset,mae,skipped`
std::string report_csv(const BenchmarkReport& report);
/// Aligned table with one column per dataset.
std::string report_table(const BenchmarkReport& report);
std::string report_json(const BenchmarkReport& report);

enum class Colormap { gray, viridis };
Colormap parse_colormap(std::string_view name);

/// Top-down P6 raster, ceil(extent / cell_size) cells per axis, each colored
/// by the mean intensity of its points; empty cells black. Row 0 is max y.
std::vector<char> render_ppm(const Scan& scan, Colormap colormap, double cell_size);
void render_tile(const Scan& scan, Colormap colormap, double cell_size, const std::string& path);

} // namespace lidarharm
