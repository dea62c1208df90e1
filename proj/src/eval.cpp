#include "lidarharm/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"
#include "lidarharm/parallel.hpp"

namespace lidarharm {

namespace {

template <typename T>
double mae_impl(std::span<const T> pred, std::span<const T> gt)
{
    if (pred.size() != gt.size())
        throw DomainError("mae: length mismatch (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(gt.size()) + ")");
    if (pred.empty())
        throw DomainError("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
    return sum / static_cast<double>(pred.size());
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> gt)
{
    return mae_impl(pred, gt);
}

double mae(std::span<const float> pred, std::span<const float> gt)
{
    return mae_impl(pred, gt);
}

std::vector<bool> overlap_regions(const Scan& scan, std::span<const Scan> others, double radius, int threads)
{
    std::vector<bool> flags(scan.points.size(), false);
    for (const Scan& other : others) {
        if (other.scan_id == scan.scan_id || other.empty())
            continue;
        const SpatialIndex index(other);
        const auto mask = overlap_mask(scan, index, radius, threads);
        for (std::size_t i = 0; i < flags.size(); ++i)
            flags[i] = flags[i] || mask[i];
    }
    return flags;
}

Box2 extract_eval_tile_box(const Scan& scan, const std::vector<bool>& overlap, double tile_size, std::uint64_t seed)
{
    if (scan.empty())
        throw DomainError("empty scan");
    if (!(tile_size > 0.0))
        throw DomainError("tile size must be positive");
    if (overlap.size() != scan.points.size())
        throw DomainError("overlap flags do not match the scan");
    constexpr double cell = 0.5;
    const Box2 bb = bounding_box(scan.points);
    const auto nx = static_cast<std::size_t>(std::ceil(bb.width() / cell)) + 1;
    const auto ny = static_cast<std::size_t>(std::ceil(bb.height() / cell)) + 1;
    // 2D prefix sums over cells touched by overlap points; a one-cell margin
    // keeps boundary points out of the closed tile.
    std::vector<std::uint32_t> blocked((nx + 1) * (ny + 1), 0);
    auto at = [&](std::size_t ix, std::size_t iy) -> std::uint32_t& { return blocked[iy * (nx + 1) + ix]; };
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        if (!overlap[i])
            continue;
        const auto cx = static_cast<std::size_t>((scan.points[i].x - bb.min_x) / cell);
        const auto cy = static_cast<std::size_t>((scan.points[i].y - bb.min_y) / cell);
        for (std::size_t ix = cx > 0 ? cx - 1 : 0; ix <= std::min(cx + 1, nx - 1); ++ix)
            for (std::size_t iy = cy > 0 ? cy - 1 : 0; iy <= std::min(cy + 1, ny - 1); ++iy)
                at(ix + 1, iy + 1) = 1;
    }
    for (std::size_t iy = 1; iy <= ny; ++iy)
        for (std::size_t ix = 1; ix <= nx; ++ix)
            at(ix, iy) += at(ix - 1, iy) + at(ix, iy - 1) - at(ix - 1, iy - 1);

    const auto span = static_cast<std::size_t>(std::ceil(tile_size / cell));
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t iy = 0; iy + span <= ny && (iy * cell + tile_size) <= bb.height() + 1e-9; ++iy)
        for (std::size_t ix = 0; ix + span <= nx && (ix * cell + tile_size) <= bb.width() + 1e-9; ++ix) {
            const std::uint32_t sum =
                at(ix + span, iy + span) - at(ix, iy + span) - at(ix + span, iy) + at(ix, iy);
            if (sum == 0)
                candidates.emplace_back(ix, iy);
        }
    if (candidates.empty())
        throw Error("no region of " + std::to_string(tile_size) + " m outside the overlap in scan " +
                    std::to_string(scan.scan_id));
    Rng rng = make_rng(seed, {0x711e, scan.scan_id});
    const auto [ix, iy] = candidates[uniform_index(rng, candidates.size())];
    const double x0 = bb.min_x + static_cast<double>(ix) * cell;
    const double y0 = bb.min_y + static_cast<double>(iy) * cell;
    const Box2 tile{x0, y0, x0 + tile_size, y0 + tile_size};
    assert_tile_disjoint(scan, overlap, tile);
    return tile;
}

std::vector<std::size_t> points_in_box(const Scan& scan, const Box2& box)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scan.points.size(); ++i)
        if (box.contains(scan.points[i].x, scan.points[i].y))
            out.push_back(i);
    return out;
}

Scan extract_eval_tile(const Scan& scan, const std::vector<bool>& overlap, double tile_size, std::uint64_t seed)
{
    const Box2 box = extract_eval_tile_box(scan, overlap, tile_size, seed);
    Scan tile;
    tile.scan_id = scan.scan_id;
    for (std::size_t i : points_in_box(scan, box))
        tile.points.push_back(scan.points[i]);
    return tile;
}

void assert_tile_disjoint(const Scan& scan, const std::vector<bool>& overlap, const Box2& tile)
{
    for (std::size_t i = 0; i < scan.points.size(); ++i)
        if (overlap[i] && tile.contains(scan.points[i].x, scan.points[i].y))
            throw Error("evaluation tile intersects the overlap region of scan " + std::to_string(scan.scan_id));
}

std::vector<std::pair<std::string, std::string>> benchmark_rows()
{
    return {{"linear", "mlp"},  {"linear", "linear"},  {"cubic", "mlp"},    {"cubic", "linear"},
            {"nearest", "mlp"}, {"nearest", "linear"}, {"pointnet", "mlp"}, {"none", "histogram"}};
}

BenchmarkReport run_benchmark(std::span<const BenchmarkVariant> variants, const BenchmarkOptions& options,
                              const LogFn& log)
{
    std::vector<std::string> gaps;
    for (const auto& v : variants) {
        if (v.source_corrupted == nullptr)
            gaps.push_back(v.name + ": corrupted source");
        if (v.source_truth == nullptr)
            gaps.push_back(v.name + ": source truth");
        if (v.target_reference == nullptr)
            gaps.push_back(v.name + ": target reference");
        if (v.model == nullptr)
            gaps.push_back(v.name + ": model");
        if (v.examples.empty())
            gaps.push_back(v.name + ": dataset");
    }
    if (!gaps.empty()) {
        std::string msg = "missing benchmark artifacts:";
        for (const auto& g : gaps)
            msg += " [" + g + "]";
        throw Error(msg);
    }

    BenchmarkReport report;
    auto& meta = report.metadata;
    meta["k"] = std::to_string(options.k);
    meta["radius"] = fmt(options.radius);
    meta["target_id"] = std::to_string(options.target_id);
    meta["hist_bins"] = std::to_string(options.hist_bins);
    meta["head_seed"] = std::to_string(options.head_train.seed);

    for (const auto& v : variants) {
        const Scan& src = *v.source_corrupted;
        const Scan& truth = *v.source_truth;
        if (src.points.size() != truth.points.size())
            throw Error(v.name + ": corrupted source and truth differ in size");
        if (!v.overlap.empty())
            assert_tile_disjoint(src, v.overlap, v.tile);
        const std::vector<std::size_t> tile = points_in_box(src, v.tile);
        if (tile.empty())
            throw Error(v.name + ": evaluation tile is empty");
        const std::string prefix = v.name + ".";
        meta[prefix + "tile"] = fmt(v.tile.min_x) + " " + fmt(v.tile.min_y) + " " + fmt(v.tile.max_x) + " " +
                                fmt(v.tile.max_y);
        meta[prefix + "tile_points"] = std::to_string(tile.size());
        meta[prefix + "source_id"] = std::to_string(src.scan_id);

        std::vector<double> gt(tile.size());
        for (std::size_t j = 0; j < tile.size(); ++j)
            gt[j] = truth.points[tile[j]].intensity;

        const SpatialIndex index(src);
        std::vector<std::vector<NeighborFeature>> hoods(tile.size());
        parallel_for(tile.size(), options.threads, [&](std::size_t j) {
            const Point& p = src.points[tile[j]];
            hoods[j] = neighbor_features(index.query_knn(p.position(), options.k, options.radius), p.position());
        });
        std::size_t no_neighbors = 0;
        for (const auto& h : hoods)
            no_neighbors += h.empty() ? 1 : 0;

        auto add = [&](const std::string& interp, const std::string& harm, const std::vector<double>& pred,
                       std::size_t skipped) {
            report.cells.push_back({interp, harm, v.name, mae(pred, gt), skipped});
            if (log) {
                char line[200];
                std::snprintf(line, sizeof line, "%s: %s + %s MAE %.5f", v.name.c_str(), interp.c_str(),
                              harm.c_str(), report.cells.back().mae);
                log(line);
            }
        };

        for (const InterpMethod method : {InterpMethod::linear, InterpMethod::cubic, InterpMethod::nearest}) {
            const std::string mname = to_string(method);
            // training pairs: interpolated source intensity at the target location
            std::vector<HeadPair> pairs(v.examples.size());
            std::vector<char> fallback(v.examples.size(), 0);
            parallel_for(v.examples.size(), options.threads, [&](std::size_t e) {
                const Example& ex = v.examples[e];
                const std::size_t n = std::min(options.k, ex.neighbors.size());
                const InterpResult r = interpolate(method, std::span(ex.neighbors).first(n));
                pairs[e] = {r.value, ex.gt_harm, ex.source_id, ex.target_id};
                fallback[e] = r.fallback ? 1 : 0;
            });
            std::vector<double> ai, ah;
            for (const auto& p : pairs)
                if (p.source_id == src.scan_id && p.target_id == options.target_id) {
                    ai.push_back(p.interp);
                    ah.push_back(p.harm);
                }
            const AffineHead affine = fit_affine(ai, ah);
            meta[prefix + mname + ".affine_a"] = fmt(affine.a);
            meta[prefix + mname + ".affine_b"] = fmt(affine.b);
            meta[prefix + mname + ".affine_pairs"] = std::to_string(ai.size());

            TrainConfig head_config = options.head_train;
            const MlpHead head = fit_mlp_head(pairs, head_config, options.shape, options.threads);

            std::vector<double> interp(tile.size());
            std::vector<char> tile_fallback(tile.size(), 0);
            parallel_for(tile.size(), options.threads, [&](std::size_t j) {
                if (hoods[j].empty()) {
                    interp[j] = src.points[tile[j]].intensity;
                    return;
                }
                const InterpResult r = interpolate(method, hoods[j]);
                interp[j] = r.value;
                tile_fallback[j] = r.fallback ? 1 : 0;
            });
            std::vector<double> pred_mlp(tile.size()), pred_lin(tile.size());
            parallel_for(tile.size(), options.threads, [&](std::size_t j) {
                pred_mlp[j] = apply_mlp_head(head.params, interp[j], src.scan_id, options.target_id);
                pred_lin[j] = std::clamp(affine.apply(interp[j]), 0.0, 1.0);
            });
            meta[prefix + mname + ".rbf_fallback_train"] =
                std::to_string(std::count(fallback.begin(), fallback.end(), 1));
            meta[prefix + mname + ".rbf_fallback_tile"] =
                std::to_string(std::count(tile_fallback.begin(), tile_fallback.end(), 1));
            add(mname, "mlp", pred_mlp, no_neighbors);
            add(mname, "linear", pred_lin, no_neighbors);
        }

        {
            std::vector<double> pred(tile.size());
            parallel_for(tile.size(), options.threads, [&](std::size_t j) {
                if (hoods[j].empty()) {
                    pred[j] = src.points[tile[j]].intensity;
                    return;
                }
                pred[j] = predict(*v.model, hoods[j], src.scan_id, options.target_id).harmonized;
            });
            add("pointnet", "mlp", pred, no_neighbors);
        }

        {
            std::vector<float> s, t;
            s.reserve(src.points.size());
            for (const Point& p : src.points)
                s.push_back(p.intensity);
            for (const Point& p : v.target_reference->points)
                t.push_back(p.intensity);
            const HistMatchLUT lut = build_histmatch(s, t, options.hist_bins);
            std::vector<double> pred(tile.size());
            for (std::size_t j = 0; j < tile.size(); ++j)
                pred[j] = apply_lut(lut, src.points[tile[j]].intensity);
            add("none", "histogram", pred, 0);
        }
    }
    return report;
}

const BenchmarkCell& find_cell(const BenchmarkReport& report, std::string_view interpolation,
                               std::string_view harmonization, std::string_view dataset)
{
    for (const auto& c : report.cells)
        if (c.interpolation == interpolation && c.harmonization == harmonization && c.dataset == dataset)
            return c;
    throw Error("no report cell " + std::string(interpolation) + "/" + std::string(harmonization) + "/" +
                std::string(dataset));
}

std::string report_csv(const BenchmarkReport& report)
{
    std::string out = "interpolation,harmonization,dataset,mae,skipped\n";
    for (const auto& c : report.cells)
        out += c.interpolation + "," + c.harmonization + "," + c.dataset + "," + fmt(c.mae) + "," +
               std::to_string(c.skipped) + "\n";
    return out;
}

std::string report_table(const BenchmarkReport& report)
{
    std::vector<std::string> datasets;
    for (const auto& c : report.cells)
        if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end())
            datasets.push_back(c.dataset);
    auto label = [](const std::string& s) {
        if (s == "linear")
            return std::string("Linear");
        if (s == "mlp")
            return std::string("MLP");
        if (s == "cubic")
            return std::string("Cubic");
        if (s == "nearest")
            return std::string("Nearest");
        if (s == "pointnet")
            return std::string("PointNet");
        if (s == "histogram")
            return std::string("Histogram Matching");
        if (s == "none")
            return std::string("-");
        if (s == "noshift")
            return std::string("No Shift");
        if (s == "shift")
            return std::string("With Shift");
        return s;
    };
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-14s %-20s", "Interpolation", "Harmonization");
    out += line;
    for (const auto& d : datasets) {
        std::snprintf(line, sizeof line, " %12s", label(d).c_str());
        out += line;
    }
    out += "\n";
    for (const auto& [interp, harm] : benchmark_rows()) {
        bool any = false;
        std::string row;
        std::snprintf(line, sizeof line, "%-14s %-20s", label(interp).c_str(), label(harm).c_str());
        row += line;
        for (const auto& d : datasets) {
            const BenchmarkCell* cell = nullptr;
            for (const auto& c : report.cells)
                if (c.interpolation == interp && c.harmonization == harm && c.dataset == d)
                    cell = &c;
            if (cell != nullptr) {
                std::snprintf(line, sizeof line, " %12.4f", cell->mae);
                any = true;
            } else {
                std::snprintf(line, sizeof line, " %12s", "-");
            }
            row += line;
        }
        if (any)
            out += row + "\n";
    }
    return out;
}

std::string report_json(const BenchmarkReport& report)
{
    nlohmann::ordered_json j;
    j["metadata"] = report.metadata;
    auto& cells = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"interpolation", c.interpolation},
                         {"harmonization", c.harmonization},
                         {"dataset", c.dataset},
                         {"mae", c.mae},
                         {"skipped", c.skipped}});
    return j.dump(2) + "\n";
}

Colormap parse_colormap(std::string_view name)
{
    if (name == "gray")
        return Colormap::gray;
    if (name == "viridis")
        return Colormap::viridis;
    throw DomainError("unknown colormap '" + std::string(name) + "'");
}

namespace {

std::array<unsigned char, 3> color(double v, Colormap map)
{
    v = std::clamp(v, 0.0, 1.0);
    if (map == Colormap::gray) {
        const auto g = static_cast<unsigned char>(std::lround(v * 255.0));
        return {g, g, g};
    }
    static constexpr double anchors[9][3] = {{68, 1, 84},    {71, 44, 122},  {59, 81, 139},
                                             {44, 113, 142}, {33, 144, 141}, {39, 173, 129},
                                             {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};
    const double pos = v * 8.0;
    const auto a = std::min(static_cast<std::size_t>(pos), std::size_t{7});
    const double t = pos - static_cast<double>(a);
    std::array<unsigned char, 3> c{};
    for (int k = 0; k < 3; ++k)
        c[k] = static_cast<unsigned char>(std::lround(anchors[a][k] + t * (anchors[a + 1][k] - anchors[a][k])));
    return c;
}

} // namespace

std::vector<char> render_ppm(const Scan& scan, Colormap colormap, double cell_size)
{
    if (scan.empty())
        throw DomainError("cannot render an empty scan");
    if (!(cell_size > 0.0))
        throw DomainError("cell size must be positive");
    const Box2 bb = bounding_box(scan.points);
    const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bb.width() / cell_size)));
    const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bb.height() / cell_size)));
    std::vector<double> sum(w * h, 0.0);
    std::vector<std::size_t> count(w * h, 0);
    for (const Point& p : scan.points) {
        const auto cx = std::min(static_cast<std::size_t>((p.x - bb.min_x) / cell_size), w - 1);
        const auto cy = std::min(static_cast<std::size_t>((p.y - bb.min_y) / cell_size), h - 1);
        const std::size_t cell = (h - 1 - cy) * w + cx;
        sum[cell] += p.intensity;
        ++count[cell];
    }
    const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<char> out(header.begin(), header.end());
    out.reserve(header.size() + 3 * w * h);
    for (std::size_t c = 0; c < w * h; ++c) {
        std::array<unsigned char, 3> rgb{0, 0, 0};
        if (count[c] > 0)
            rgb = color(sum[c] / static_cast<double>(count[c]), colormap);
        for (unsigned char b : rgb)
            out.push_back(static_cast<char>(b));
    }
    return out;
}

void render_tile(const Scan& scan, Colormap colormap, double cell_size, const std::string& path)
{
    binary::write_file(path, render_ppm(scan, colormap, cell_size));
}

} // namespace lidarharm
