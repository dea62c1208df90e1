#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lidarharm/response.hpp"
#include "lidarharm/synth.hpp"
#include "lidarharm/train.hpp"

namespace lidarharm {

struct DatasetConfig {
    std::uint16_t target_id = 1;
    std::size_t k = 150;
    double radius = 1.0;
    std::size_t min_neighbors = 10;
    std::size_t min_overlap = 5000;
    std::size_t n_bins = 10;
    std::size_t overlap_samples = 6000; ///< target points drawn per overlapping source
    std::size_t inscan_samples = 2000;  ///< non-overlap points drawn per scan
    std::size_t train_examples = 20000; ///< size after stratified resampling
    double val_fraction = 0.1;
};

struct EvalConfig {
    std::uint16_t source_id = 0;
    double tile_size = 50.0;
    std::size_t k = 5;
    double radius = 1.0;
    std::string colormap = "viridis";
    double cell_size = 0.5;
    std::size_t hist_bins = 256;
};

/// Everything a pipeline run depends on.
struct Config {
    std::uint64_t seed = 42;
    SceneSpec scene;
    std::string curves_path;                         ///< optional tabulated curve file
    std::string curve_pool = "gamma:0.5,gamma:0.7,scurve:8:0.5,gamma:1.6";
    std::map<std::uint16_t, std::string> corruption; ///< explicit scan id -> curve spec
    ShiftParams shift;
    DatasetConfig dataset;
    TrainConfig train;
    EvalConfig eval;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys and malformed values throw ConfigError naming the line.
Config parse_config(std::string_view text);
Config load_config(const std::string& path);

/// Sets one dotted key. Throws ConfigError for unknown keys or bad values.
void set_config_value(Config& config, std::string_view key, std::string_view value);

/// Every key with its resolved value, in a stable order; parse_config of the
/// result reproduces the config.
std::string format_config(const Config& config);

/// Propagates `seed` into the scene and training seeds and checks ranges.
void finalize(Config& config);

/// Curve spec assigned to `scan_id`: the explicit assignment, identity for
/// the target scan, otherwise a seeded draw from the pool.
std::string curve_for_scan(const Config& config, std::uint16_t scan_id);

} // namespace lidarharm
