#include "lidarharm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"
#include "lidarharm/scan_io.hpp"
#include "lidarharm/synth.hpp"

namespace fs = std::filesystem;

namespace lidarharm {

namespace {

void say(const LogFn& log, const std::string& msg)
{
    if (log)
        log(msg);
}

XExtent scene_extent(const Config& config)
{
    return {0.0, config.scene.x_size};
}

const Scan& find_scan(const std::vector<Scan>& scans, std::uint16_t id)
{
    for (const Scan& s : scans)
        if (s.scan_id == id)
            return s;
    throw DomainError("scan " + std::to_string(id) + " not present");
}

/// Uniform sample of `n` members without replacement, returned ascending.
std::vector<std::size_t> sample_indices(std::vector<std::size_t> pool, std::size_t n, Rng& rng)
{
    n = std::min(n, pool.size());
    for (std::size_t i = 0; i < n; ++i)
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::size_t nonempty_cells(std::span<const Example> examples, std::size_t n_bins)
{
    std::set<std::pair<ScanPair, std::size_t>> cells;
    for (const Example& e : examples)
        cells.insert({{e.source_id, e.target_id}, intensity_bin(e.gt_harm, n_bins)});
    return cells.size();
}

std::vector<Example> balance(std::span<const Example> examples, std::size_t n_bins, std::size_t total, Rng& rng,
                             std::vector<std::string>& warnings)
{
    if (examples.empty())
        return {};
    const std::size_t cells = nonempty_cells(examples, n_bins);
    const std::size_t per_bin = std::max<std::size_t>(1, (total + cells / 2) / cells);
    ResampleResult r = stratified_resample(examples, n_bins, per_bin, rng);
    for (auto& w : r.warnings)
        warnings.push_back(std::move(w));
    // shuffled so batches mix pairs and bins
    for (std::size_t i = r.examples.size(); i > 1; --i)
        std::swap(r.examples[i - 1], r.examples[uniform_index(rng, i)]);
    return std::move(r.examples);
}

void write_resolved(const Config& config, const fs::path& dir)
{
    fs::create_directories(dir);
    const std::string text = format_config(config);
    binary::write_file((dir / "resolved.cfg").string(), std::span(text.data(), text.size()));
}

void write_text(const fs::path& path, const std::string& text)
{
    binary::write_file(path.string(), std::span(text.data(), text.size()));
}

std::vector<Scan> read_scans(const fs::path& dir, int n)
{
    std::vector<Scan> scans;
    for (int i = 0; i < n; ++i)
        scans.push_back(read_scan(scan_path(dir, static_cast<std::uint16_t>(i)).string()));
    return scans;
}

} // namespace

std::string to_string(Variant v)
{
    return v == Variant::noshift ? "noshift" : "shift";
}

Variant parse_variant(std::string_view name)
{
    if (name == "noshift")
        return Variant::noshift;
    if (name == "shift")
        return Variant::shift;
    throw DomainError("unknown dataset '" + std::string(name) + "' (expected noshift or shift)");
}

fs::path scan_path(const fs::path& dir, std::uint16_t scan_id)
{
    return dir / ("scan_" + std::to_string(scan_id) + ".lhs");
}

std::vector<Scan> synthesize(const Config& config)
{
    const Scan world = generate_world(config.scene);
    return cut_strips(world, config.scene);
}

ResponseFunction curve_for(const Config& config, std::uint16_t scan_id)
{
    std::vector<TabulatedCurve> tables;
    if (!config.curves_path.empty())
        tables = load_curves(config.curves_path);
    return parse_curve_spec(curve_for_scan(config, scan_id), tables);
}

VariantScans corrupt_variant(const Config& config, const std::vector<Scan>& strips, Variant variant)
{
    VariantScans out;
    const XExtent extent = scene_extent(config);
    const ShiftParams* shift = variant == Variant::shift ? &config.shift : nullptr;
    const ResponseFunction identity = ResponseFunction::identity();
    for (const Scan& s : strips) {
        out.truth.push_back(shift != nullptr ? corrupt_scan(s, identity, shift, extent) : s);
        out.corrupted.push_back(corrupt_scan(out.truth.back(), curve_for(config, s.scan_id), nullptr, extent));
    }
    return out;
}

std::vector<bool> eval_overlap(const Config& config, const std::vector<Scan>& scans, int threads)
{
    const Scan& source = find_scan(scans, config.eval.source_id);
    return overlap_regions(source, scans, config.dataset.radius, threads);
}

Dataset build_dataset(const Config& config, const VariantScans& scans, Variant variant, int threads,
                      const LogFn& log)
{
    const DatasetConfig& dc = config.dataset;
    const XExtent extent = scene_extent(config);
    const NeighborhoodOptions hood{dc.k, dc.radius, dc.min_neighbors};
    Dataset ds;
    DatasetManifest& m = ds.manifest;
    m.k = dc.k;
    m.radius = dc.radius;
    m.min_neighbors = dc.min_neighbors;
    m.target_id = dc.target_id;
    m.shift = variant == Variant::shift;
    m.seed = config.seed;
    m.eval_source_id = config.eval.source_id;
    for (const Scan& s : scans.corrupted)
        m.corruption[s.scan_id] = curve_for(config, s.scan_id).describe();

    // evaluation tile first, so in-scan sampling can stay clear of it
    const Scan& eval_source = find_scan(scans.truth, config.eval.source_id);
    const std::vector<bool> eval_flags = eval_overlap(config, scans.truth, threads);
    const Box2 tile = extract_eval_tile_box(eval_source, eval_flags, config.eval.tile_size, config.seed);
    m.eval_tile = tile;
    say(log, "evaluation tile [" + std::to_string(tile.min_x) + ", " + std::to_string(tile.max_x) + "] x [" +
                 std::to_string(tile.min_y) + ", " + std::to_string(tile.max_y) + "]");
    const Box2 keep_out{tile.min_x - dc.radius, tile.min_y - dc.radius, tile.max_x + dc.radius,
                        tile.max_y + dc.radius};

    const auto pairs = find_overlap_pairs(scans.corrupted, dc.target_id, dc.min_overlap, dc.radius, threads);
    if (std::none_of(pairs.begin(), pairs.end(),
                     [&](const OverlapPair& p) { return p.source_id == config.eval.source_id; }))
        throw Error("evaluation source " + std::to_string(config.eval.source_id) +
                    " does not overlap the target scan enough");
    const Scan& target_truth = find_scan(scans.truth, dc.target_id);

    std::vector<Example> pool;
    std::vector<std::uint16_t> members{dc.target_id};
    for (const OverlapPair& pair : pairs) {
        say(log, "pair (" + std::to_string(pair.source_id) + ", " + std::to_string(pair.target_id) + "): " +
                     std::to_string(pair.overlap) + " overlapping target points");
        members.push_back(pair.source_id);
        const SpatialIndex source(find_scan(scans.corrupted, pair.source_id));
        const auto mask = overlap_mask(target_truth, source, dc.radius, threads);
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i])
                candidates.push_back(i);
        Rng rng = make_rng(config.seed, {0xda7a, pair.source_id});
        const auto chosen = sample_indices(std::move(candidates), dc.overlap_samples, rng);
        BuildResult r = build_overlap_examples(target_truth, source, curve_for(config, pair.source_id), chosen, hood,
                                               extent, threads);
        m.skipped_sparse += r.skipped_sparse;
        std::move(r.examples.begin(), r.examples.end(), std::back_inserter(pool));
    }

    std::sort(members.begin(), members.end());
    for (std::uint16_t id : members) {
        const Scan& scan = find_scan(scans.corrupted, id);
        const std::vector<bool> flags = overlap_regions(scan, scans.corrupted, dc.radius, threads);
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (!flags[i] && !(id == config.eval.source_id && keep_out.contains(scan.points[i].x, scan.points[i].y)))
                candidates.push_back(i);
        Rng rng = make_rng(config.seed, {0x1c5a, id});
        const auto chosen = sample_indices(std::move(candidates), dc.inscan_samples, rng);
        const SpatialIndex index(scan);
        BuildResult r = build_inscan_examples(index, chosen, hood, extent, threads);
        m.skipped_sparse += r.skipped_sparse;
        say(log, "scan " + std::to_string(id) + ": " + std::to_string(r.examples.size()) + " in-scan examples");
        std::move(r.examples.begin(), r.examples.end(), std::back_inserter(pool));
    }
    if (pool.empty())
        throw Error("no examples could be built (all neighborhoods too sparse)");

    // split the raw pool, then balance each split on its own so duplicates
    // from oversampling never cross the split
    Rng split_rng = make_rng(config.seed, {0x5b1});
    for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[uniform_index(split_rng, i)]);
    const auto n_val_raw = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * dc.val_fraction));
    const std::span<const Example> raw(pool);
    const auto raw_val = raw.first(n_val_raw);
    const auto raw_train = raw.subspan(n_val_raw);
    const auto n_val =
        static_cast<std::size_t>(std::llround(static_cast<double>(dc.train_examples) * dc.val_fraction));
    Rng bal_rng = make_rng(config.seed, {0xba1});
    std::vector<Example> train = balance(raw_train, dc.n_bins, dc.train_examples - n_val, bal_rng, m.warnings);
    std::vector<Example> val = balance(raw_val, dc.n_bins, n_val, bal_rng, m.warnings);
    if (train.empty())
        throw Error("training split is empty");
    m.train_count = train.size();
    m.val_count = val.size();
    ds.examples = std::move(train);
    std::move(val.begin(), val.end(), std::back_inserter(ds.examples));
    recount(m, ds.examples, dc.n_bins);
    say(log, "dataset: " + std::to_string(m.train_count) + " train, " + std::to_string(m.val_count) + " val, " +
                 std::to_string(m.skipped_sparse) + " sparse neighborhoods skipped");
    return ds;
}

TrainResult train_model(const Config& config, const Dataset& dataset, int threads, const LogFn& log)
{
    return train(dataset.train(), dataset.val(), config.train, ModelShape{}, threads, log);
}

BenchmarkOptions benchmark_options(const Config& config, int threads)
{
    BenchmarkOptions o;
    o.target_id = config.dataset.target_id;
    o.k = config.eval.k;
    o.radius = config.eval.radius;
    o.hist_bins = config.eval.hist_bins;
    o.head_train = config.train;
    o.threads = threads;
    return o;
}

void stage_synth(const Config& config, const fs::path& out, const LogFn& log)
{
    write_resolved(config, out);
    const auto strips = synthesize(config);
    fs::create_directories(out / "truth");
    for (const Scan& s : strips) {
        write_scan(s, scan_path(out / "truth", s.scan_id).string());
        say(log, "strip " + std::to_string(s.scan_id) + ": " + std::to_string(s.size()) + " points");
    }
}

void stage_corrupt(const Config& config, const fs::path& out, const LogFn& log)
{
    write_resolved(config, out);
    const auto strips = read_scans(out / "truth", config.scene.n_strips);
    for (Variant v : {Variant::noshift, Variant::shift}) {
        const fs::path dir = out / to_string(v);
        write_resolved(config, dir);
        const VariantScans scans = corrupt_variant(config, strips, v);
        fs::create_directories(dir / "truth");
        fs::create_directories(dir / "corrupted");
        for (std::size_t i = 0; i < strips.size(); ++i) {
            write_scan(scans.truth[i], scan_path(dir / "truth", scans.truth[i].scan_id).string());
            write_scan(scans.corrupted[i], scan_path(dir / "corrupted", scans.corrupted[i].scan_id).string());
        }
        for (const Scan& s : strips)
            say(log, to_string(v) + ": scan " + std::to_string(s.scan_id) + " <- " +
                         curve_for(config, s.scan_id).describe());
    }
}

namespace {

VariantScans load_variant(const Config& config, const fs::path& out, Variant v)
{
    const fs::path dir = out / to_string(v);
    return {read_scans(dir / "truth", config.scene.n_strips), read_scans(dir / "corrupted", config.scene.n_strips)};
}

} // namespace

void stage_build_dataset(const Config& config, const fs::path& out, Variant variant, int threads, const LogFn& log)
{
    const fs::path dir = out / to_string(variant);
    write_resolved(config, out);
    write_resolved(config, dir);
    const Dataset ds = build_dataset(config, load_variant(config, out, variant), variant, threads, log);
    save_dataset(ds, (dir / "dataset.lhd").string());
}

void stage_train(const Config& config, const fs::path& out, Variant variant, int threads, const LogFn& log)
{
    const fs::path dir = out / to_string(variant);
    write_resolved(config, out);
    write_resolved(config, dir);
    const Dataset ds = load_dataset((dir / "dataset.lhd").string());
    const TrainResult r = train_model(config, ds, threads, log);
    write_text(dir / "history.csv", history_csv(r.history));
    if (r.best_epoch >= 0)
        save_checkpoint(r.params, (dir / "model.lhm").string());
    if (r.diverged)
        throw Error("training diverged (" + r.divergence_reason + ")" +
                    (r.best_epoch >= 0 ? "; best checkpoint from epoch " + std::to_string(r.best_epoch) + " saved"
                                       : std::string("; no checkpoint saved")));
    say(log, "best validation loss " + std::to_string(r.best_val_loss) + " at epoch " +
                 std::to_string(r.best_epoch));
}

void stage_harmonize(const Config& config, const fs::path& out, Variant variant, int threads, const LogFn& log)
{
    const fs::path dir = out / to_string(variant);
    write_resolved(config, out);
    write_resolved(config, dir);
    const ParamSet params = load_checkpoint((dir / "model.lhm").string(), model_layout());
    const Scan source =
        read_scan(scan_path(dir / "corrupted", config.eval.source_id).string());
    const SpatialIndex index(source);
    HarmonizeStats stats;
    const Scan harmonized = harmonize_scan(params, source, index, config.dataset.target_id, config.eval.k,
                                           config.eval.radius, threads, &stats);
    fs::create_directories(dir / "harmonized");
    write_scan(harmonized, scan_path(dir / "harmonized", source.scan_id).string());
    say(log, "harmonized scan " + std::to_string(source.scan_id) + " (" + std::to_string(stats.no_neighbors) +
                 " points without neighbors kept)");
}

BenchmarkReport stage_evaluate(const Config& config, const fs::path& out, const std::vector<Variant>& variants,
                               int threads, const LogFn& log)
{
    write_resolved(config, out);
    struct Loaded {
        VariantScans scans;
        Dataset dataset;
        ParamSet model;
    };
    std::vector<Loaded> loaded;
    loaded.reserve(variants.size());
    for (Variant v : variants) {
        const fs::path dir = out / to_string(v);
        write_resolved(config, dir);
        loaded.push_back({load_variant(config, out, v), load_dataset((dir / "dataset.lhd").string()),
                          load_checkpoint((dir / "model.lhm").string(), model_layout())});
    }
    std::vector<BenchmarkVariant> inputs;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const Loaded& l = loaded[i];
        if (!l.dataset.manifest.eval_tile)
            throw Error(to_string(variants[i]) + ": dataset has no evaluation tile");
        BenchmarkVariant b;
        b.name = to_string(variants[i]);
        b.source_corrupted = &find_scan(l.scans.corrupted, config.eval.source_id);
        b.source_truth = &find_scan(l.scans.truth, config.eval.source_id);
        b.target_reference = &find_scan(l.scans.corrupted, config.dataset.target_id);
        b.examples = l.dataset.train();
        b.model = &l.model;
        b.tile = *l.dataset.manifest.eval_tile;
        b.overlap = eval_overlap(config, l.scans.truth, threads);
        inputs.push_back(std::move(b));
    }
    BenchmarkReport report = run_benchmark(inputs, benchmark_options(config, threads), log);
    report.metadata["seed"] = std::to_string(config.seed);
    report.metadata["config"] = format_config(config);
    const fs::path dir = variants.size() == 1 ? out / to_string(variants[0]) : out;
    write_text(dir / "report.csv", report_csv(report));
    write_text(dir / "report.txt", report_table(report));
    write_text(dir / "report.json", report_json(report));
    return report;
}

void stage_render(const Config& config, const fs::path& out, Variant variant, int threads, const LogFn& log)
{
    const fs::path dir = out / to_string(variant);
    write_resolved(config, out);
    write_resolved(config, dir);
    const Dataset ds = load_dataset((dir / "dataset.lhd").string());
    if (!ds.manifest.eval_tile)
        throw Error("dataset has no evaluation tile");
    const Box2 tile = *ds.manifest.eval_tile;
    const Colormap map = parse_colormap(config.eval.colormap);
    fs::create_directories(dir / "render");

    const Scan corrupted = read_scan(scan_path(dir / "corrupted", config.eval.source_id).string());
    const Scan truth = read_scan(scan_path(dir / "truth", config.eval.source_id).string());
    const std::vector<std::size_t> members = points_in_box(corrupted, tile);
    auto crop = [&](const Scan& s) {
        Scan t;
        t.scan_id = s.scan_id;
        for (std::size_t i : members)
            t.points.push_back(s.points[i]);
        return t;
    };
    render_tile(crop(truth), map, config.eval.cell_size, (dir / "render" / "truth.ppm").string());
    render_tile(crop(corrupted), map, config.eval.cell_size, (dir / "render" / "corrupted.ppm").string());
    const fs::path model = dir / "model.lhm";
    if (fs::exists(model)) {
        const ParamSet params = load_checkpoint(model.string(), model_layout());
        const SpatialIndex index(corrupted);
        Scan harmonized = crop(corrupted);
        const auto values = harmonize_points(params, index, members, config.dataset.target_id, config.eval.k,
                                             config.eval.radius, threads);
        for (std::size_t j = 0; j < values.size(); ++j)
            harmonized.points[j].intensity = values[j];
        render_tile(harmonized, map, config.eval.cell_size, (dir / "render" / "harmonized.ppm").string());
    }
    say(log, "rendered " + std::to_string(members.size()) + " tile points to " + (dir / "render").string());
}

} // namespace lidarharm
