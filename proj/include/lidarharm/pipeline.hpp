#pragma once

// Pipeline stages shared by the command-line tool and the end-to-end tests.
// Work directory layout:
//   <out>/resolved.cfg
//   <out>/truth/scan_<id>.lhs                       world intensities per strip
//   <out>/<variant>/truth/scan_<id>.lhs             harmonization truth (shift applied)
//   <out>/<variant>/corrupted/scan_<id>.lhs         as recorded by each sensor
//   <out>/<variant>/dataset.lhd
//   <out>/<variant>/model.lhm, history.csv
//   <out>/<variant>/harmonized/scan_<id>.lhs
//   <out>/report.{csv,txt,json}                     or <out>/<variant>/report.* for one variant
//   <out>/<variant>/render/{truth,corrupted,harmonized}.ppm

#include <filesystem>
#include <string>
#include <vector>

#include "lidarharm/config.hpp"
#include "lidarharm/dataset.hpp"
#include "lidarharm/eval.hpp"
#include "lidarharm/train.hpp"

namespace lidarharm {

enum class Variant { noshift, shift };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Ground-truth flight strips for the configured scene.
std::vector<Scan> synthesize(const Config& config);

/// Resolved response curve for every scan id.
ResponseFunction curve_for(const Config& config, std::uint16_t scan_id);

struct VariantScans {
    std::vector<Scan> truth;     ///< harmonization truth (shifted brightness in the shift variant)
    std::vector<Scan> corrupted; ///< truth recorded through each scan's response curve
};

VariantScans corrupt_variant(const Config& config, const std::vector<Scan>& strips, Variant variant);

/// Overlap examples for every qualifying (source, target) pair, in-scan
/// examples for the target and its sources, stratified resampling of the
/// train and validation splits, and the evaluation tile of eval.source_id.
Dataset build_dataset(const Config& config, const VariantScans& scans, Variant variant, int threads = 1,
                      const LogFn& log = {});

/// Overlap flags of the evaluation source against every other strip.
std::vector<bool> eval_overlap(const Config& config, const std::vector<Scan>& scans, int threads = 1);

TrainResult train_model(const Config& config, const Dataset& dataset, int threads = 1, const LogFn& log = {});

BenchmarkOptions benchmark_options(const Config& config, int threads);

// File-based stages. Each writes the resolved config into `out` and into the
// variant directory it touches.
void stage_synth(const Config& config, const std::filesystem::path& out, const LogFn& log = {});
void stage_corrupt(const Config& config, const std::filesystem::path& out, const LogFn& log = {});
void stage_build_dataset(const Config& config, const std::filesystem::path& out, Variant variant, int threads,
                         const LogFn& log = {});
/// Throws Error after saving the best checkpoint so far when training diverges.
void stage_train(const Config& config, const std::filesystem::path& out, Variant variant, int threads,
                 const LogFn& log = {});
void stage_harmonize(const Config& config, const std::filesystem::path& out, Variant variant, int threads,
                     const LogFn& log = {});
BenchmarkReport stage_evaluate(const Config& config, const std::filesystem::path& out,
                               const std::vector<Variant>& variants, int threads, const LogFn& log = {});
void stage_render(const Config& config, const std::filesystem::path& out, Variant variant, int threads,
                  const LogFn& log = {});

std::filesystem::path scan_path(const std::filesystem::path& dir, std::uint16_t scan_id);

} // namespace lidarharm
