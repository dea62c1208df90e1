#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lidarharm/dataset.hpp"
#include "lidarharm/network.hpp"
#include "lidarharm/optim.hpp"
#include "lidarharm/spatial_index.hpp"

namespace lidarharm {

struct TrainConfig {
    int epochs = 40;
    std::size_t batch = 50;
    ScheduleConfig schedule;
    double dropout = 0.3;
    LossKind loss = LossKind::l1;
    std::uint64_t seed = 42;
};

void validate(const TrainConfig& config);

struct HistoryRow {
    int epoch = 0;
    std::size_t step = 0; ///< steps_per_epoch on validation rows
    double lr = 0.0;
    double loss_interp = 0.0;
    double loss_harm = 0.0;
    double loss_total = 0.0;
    Split split = Split::train;
};

/// `epoch,step,lr,loss_I,loss_H,loss_total,split`. Train rows hold batch
/// sums, val rows per-example means over the validation split.
std::string history_csv(const std::vector<HistoryRow>& history);

struct TrainResult {
    ParamSet params; ///< best validation loss
    std::vector<HistoryRow> history;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    bool diverged = false;
    std::string divergence_reason;
};

using LogFn = std::function<void(const std::string&)>;

/// Per-sample objective: runs forward (and backward into `grad` when it is
/// non-null) for sample `index` and returns its loss terms.
using SampleFn = std::function<LossTerms(const ParamSet& params, std::size_t index, const DropoutControl& dropout,
                                         ParamSet* grad)>;

/// Shared loop for the full model and the stand-alone head: seeded shuffled
/// batches, Adam with the cyclical schedule, per-epoch validation, best-val
/// selection. Per-example gradients are reduced in a fixed order, so results
/// do not depend on `threads`.
TrainResult train_loop(ParamSet initial, std::size_t n_train, std::size_t n_val, const SampleFn& train_sample,
                       const SampleFn& val_sample, const TrainConfig& config, int threads, const LogFn& log = {});

/// Trains the harmonization network on the dataset's train split and
/// validates on its val split.
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig& config,
                  const ModelShape& shape = {}, int threads = 1, const LogFn& log = {});

/// Joint loss and its gradient for one example (used by training and tests).
LossTerms example_objective(const ParamSet& params, const Example& example, LossKind kind,
                            const DropoutControl& dropout, ParamSet* grad);

/// Gradient of the summed batch loss; dropout masks are drawn per example
/// from (seed, example position).
ParamSet batch_gradient(const ParamSet& params, std::span<const Example> batch, const TrainConfig& config,
                        std::uint64_t mask_seed, LossTerms* total = nullptr);

struct HarmonizeStats {
    std::size_t no_neighbors = 0;
};

/// Harmonized intensity at each listed point of the source scan, predicted
/// from its k-neighborhood in the same scan (the point itself included).
std::vector<float> harmonize_points(const ParamSet& params, const SpatialIndex& source,
                                    std::span<const std::size_t> indices, std::uint16_t target_id, std::size_t k,
                                    double radius, int threads = 1, HarmonizeStats* stats = nullptr);

/// Every point of the source replaced by its harmonized intensity.
Scan harmonize_scan(const ParamSet& params, const Scan& source, const SpatialIndex& index, std::uint16_t target_id,
                    std::size_t k = 5, double radius = 1.0, int threads = 1, HarmonizeStats* stats = nullptr);

/// Relative neighbor features around `loc`.
std::vector<NeighborFeature> neighbor_features(const std::vector<Neighbor>& neighbors, const Vec3& loc);

} // namespace lidarharm
