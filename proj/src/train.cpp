#include "lidarharm/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lidarharm/error.hpp"
#include "lidarharm/parallel.hpp"

namespace lidarharm {

namespace {

// Examples per gradient buffer. Fixed so the reduction order is independent
// of the thread count.
constexpr std::size_t kChunk = 5;

void add_into(ParamSet& dst, const ParamSet& src)
{
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += s[i];
}

} // namespace

void validate(const TrainConfig& c)
{
    if (c.epochs < 1)
        throw DomainError("train.epochs must be at least 1");
    if (c.batch < 1)
        throw DomainError("train.batch must be at least 1");
    if (!(c.schedule.lr_min > 0.0 && c.schedule.lr_min < c.schedule.lr_max))
        throw DomainError("learning rates need 0 < lr_min < lr_max");
    if (!(c.schedule.peak_decay >= 0.0 && c.schedule.peak_decay < 1.0))
        throw DomainError("train.peak_decay must lie in [0, 1)");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0))
        throw DomainError("train.dropout must lie in [0, 1)");
}

std::string history_csv(const std::vector<HistoryRow>& history)
{
    std::string out = "epoch,step,lr,loss_I,loss_H,loss_total,split\n";
    char line[256];
    for (const auto& r : history) {
        const int n = std::snprintf(line, sizeof line, "%d,%zu,%.17g,%.17g,%.17g,%.17g,%s\n", r.epoch, r.step, r.lr,
                                    r.loss_interp, r.loss_harm, r.loss_total,
                                    r.split == Split::train ? "train" : "val");
        out.append(line, static_cast<std::size_t>(n));
    }
    return out;
}

TrainResult train_loop(ParamSet initial, std::size_t n_train, std::size_t n_val, const SampleFn& train_sample,
                       const SampleFn& val_sample, const TrainConfig& config, int threads, const LogFn& log)
{
    validate(config);
    if (n_train == 0)
        throw DomainError("training split is empty");

    TrainResult result;
    ParamSet params = std::move(initial);
    result.params = params;
    AdamState adam(params.size());

    const std::size_t steps_per_epoch = (n_train + config.batch - 1) / config.batch;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t max_chunks = (config.batch + kChunk - 1) / kChunk;
    std::vector<ParamSet> buffers(max_chunks, ParamSet(params.layout()));
    std::vector<LossTerms> terms(config.batch);
    ParamSet grad(params.layout());
    double last_lr = 0.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng = make_rng(config.seed, {0x5eed, static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const std::size_t begin = step * config.batch;
            const std::size_t count = std::min(config.batch, n_train - begin);
            const std::size_t chunks = (count + kChunk - 1) / kChunk;
            parallel_for(chunks, threads, [&](std::size_t c) {
                std::fill(buffers[c].values().begin(), buffers[c].values().end(), 0.0);
                for (std::size_t pos = c * kChunk; pos < std::min(count, (c + 1) * kChunk); ++pos) {
                    Rng mask_rng = make_rng(config.seed, {static_cast<std::uint64_t>(epoch), step, pos});
                    const DropoutControl dropout{Mode::train, config.dropout, &mask_rng, nullptr};
                    terms[pos] = train_sample(params, order[begin + pos], dropout, &buffers[c]);
                }
            });
            std::fill(grad.values().begin(), grad.values().end(), 0.0);
            for (std::size_t c = 0; c < chunks; ++c)
                add_into(grad, buffers[c]);
            LossTerms sum;
            for (std::size_t pos = 0; pos < count; ++pos) {
                sum.interp += terms[pos].interp;
                sum.harmonized += terms[pos].harmonized;
            }
            sum.total = sum.interp + sum.harmonized;

            const double lr = cyclical_lr(epoch, step, steps_per_epoch, config.schedule);
            last_lr = lr;
            result.history.push_back({epoch, step, lr, sum.interp, sum.harmonized, sum.total, Split::train});
            try {
                adam_step(params, grad.values(), lr, adam);
            } catch (const Error& e) {
                result.diverged = true;
                result.divergence_reason = "epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " +
                                           e.what();
                if (log)
                    log("training diverged: " + result.divergence_reason);
                return result;
            }
        }

        std::vector<LossTerms> val_terms(n_val);
        parallel_for(n_val, threads,
                     [&](std::size_t i) { val_terms[i] = val_sample(params, i, DropoutControl{}, nullptr); });
        LossTerms val;
        for (const auto& t : val_terms) {
            val.interp += t.interp;
            val.harmonized += t.harmonized;
        }
        const double denom = n_val > 0 ? static_cast<double>(n_val) : 1.0;
        val.interp /= denom;
        val.harmonized /= denom;
        val.total = val.interp + val.harmonized;
        result.history.push_back(
            {epoch, steps_per_epoch, last_lr, val.interp, val.harmonized, val.total, Split::val});

        if (!std::isfinite(val.total) || !params.all_finite()) {
            result.diverged = true;
            result.divergence_reason = "validation loss is not finite at epoch " + std::to_string(epoch);
            if (log)
                log("training diverged: " + result.divergence_reason);
            return result;
        }
        if (result.best_epoch < 0 || val.total < result.best_val_loss) {
            result.best_epoch = epoch;
            result.best_val_loss = val.total;
            result.params = params;
        }
        if (log) {
            char line[200];
            std::snprintf(line, sizeof line, "epoch %d: val loss_I %.5f loss_H %.5f (best epoch %d)", epoch,
                          val.interp, val.harmonized, result.best_epoch);
            log(line);
        }
    }
    return result;
}

LossTerms example_objective(const ParamSet& params, const Example& example, LossKind kind,
                            const DropoutControl& dropout, ParamSet* grad)
{
    ForwardTrace trace;
    const Prediction p = forward(params, example, dropout, trace);
    const LossTerms terms = loss(p.interp, p.harmonized, example.gt_interp, example.gt_harm, kind);
    if (grad != nullptr)
        backward(params, trace, rho_grad(p.interp, example.gt_interp, kind),
                 rho_grad(p.harmonized, example.gt_harm, kind), *grad);
    return terms;
}

ParamSet batch_gradient(const ParamSet& params, std::span<const Example> batch, const TrainConfig& config,
                        std::uint64_t mask_seed, LossTerms* total)
{
    ParamSet grad(params.layout());
    LossTerms sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Rng rng = make_rng(mask_seed, {i});
        const DropoutControl dropout{Mode::train, config.dropout, &rng, nullptr};
        const LossTerms t = example_objective(params, batch[i], config.loss, dropout, &grad);
        sum.interp += t.interp;
        sum.harmonized += t.harmonized;
    }
    sum.total = sum.interp + sum.harmonized;
    if (total != nullptr)
        *total = sum;
    return grad;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig& config,
                  const ModelShape& shape, int threads, const LogFn& log)
{
    ParamSet params(model_layout(shape));
    initialize_params(params, config.seed);
    const SampleFn train_fn = [&](const ParamSet& p, std::size_t i, const DropoutControl& d, ParamSet* g) {
        return example_objective(p, train_set[i], config.loss, d, g);
    };
    const SampleFn val_fn = [&](const ParamSet& p, std::size_t i, const DropoutControl& d, ParamSet* g) {
        return example_objective(p, val_set[i], config.loss, d, g);
    };
    return train_loop(std::move(params), train_set.size(), val_set.size(), train_fn, val_fn, config, threads, log);
}

std::vector<NeighborFeature> neighbor_features(const std::vector<Neighbor>& neighbors, const Vec3& loc)
{
    std::vector<NeighborFeature> out;
    out.reserve(neighbors.size());
    for (const Neighbor& n : neighbors)
        out.push_back({static_cast<float>(n.point.x - loc[0]), static_cast<float>(n.point.y - loc[1]),
                       static_cast<float>(n.point.z - loc[2]), n.point.intensity});
    return out;
}

std::vector<float> harmonize_points(const ParamSet& params, const SpatialIndex& source,
                                    std::span<const std::size_t> indices, std::uint16_t target_id, std::size_t k,
                                    double radius, int threads, HarmonizeStats* stats)
{
    if (target_id >= kDictionarySize)
        throw DomainError("target id " + std::to_string(target_id) + " outside embedding dictionary");
    const auto& points = source.points();
    std::vector<float> out(indices.size());
    std::vector<char> missing(indices.size(), 0);
    parallel_for(indices.size(), threads, [&](std::size_t j) {
        const Point& p = points.at(indices[j]);
        const auto neighbors = source.query_knn(p.position(), k, radius);
        if (neighbors.empty()) {
            out[j] = p.intensity;
            missing[j] = 1;
            return;
        }
        const auto features = neighbor_features(neighbors, p.position());
        out[j] = static_cast<float>(predict(params, features, source.scan_id(), target_id).harmonized);
    });
    if (stats != nullptr)
        stats->no_neighbors = static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1));
    return out;
}

Scan harmonize_scan(const ParamSet& params, const Scan& source, const SpatialIndex& index, std::uint16_t target_id,
                    std::size_t k, double radius, int threads, HarmonizeStats* stats)
{
    std::vector<std::size_t> all(source.points.size());
    std::iota(all.begin(), all.end(), 0);
    const auto values = harmonize_points(params, index, all, target_id, k, radius, threads, stats);
    Scan out = source;
    for (std::size_t i = 0; i < values.size(); ++i)
        out.points[i].intensity = values[i];
    return out;
}

} // namespace lidarharm
