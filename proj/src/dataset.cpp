#include "lidarharm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"
#include "lidarharm/parallel.hpp"

namespace lidarharm {

namespace {

constexpr char kMagic[4] = {'L', 'H', 'D', '1'};
constexpr std::uint16_t kVersion = 1;

std::vector<NeighborFeature> to_features(const std::vector<Neighbor>& neighbors, const Vec3& loc)
{
    std::vector<NeighborFeature> out;
    out.reserve(neighbors.size());
    for (const Neighbor& n : neighbors)
        out.push_back({static_cast<float>(n.point.x - loc[0]), static_cast<float>(n.point.y - loc[1]),
                       static_cast<float>(n.point.z - loc[2]), n.point.intensity});
    return out;
}

BuildResult compact(std::vector<std::optional<Example>>& slots)
{
    BuildResult result;
    for (auto& slot : slots) {
        if (slot)
            result.examples.push_back(std::move(*slot));
        else
            ++result.skipped_sparse;
    }
    return result;
}

} // namespace

std::vector<OverlapPair> find_overlap_pairs(const std::vector<Scan>& scans, std::uint16_t target_id,
                                            std::size_t min_overlap, double radius, int threads)
{
    if (scans.size() < 2)
        throw DomainError("need at least two scans to find overlap pairs");
    if (min_overlap < 1)
        throw DomainError("min_overlap must be at least 1");
    const Scan* target = nullptr;
    for (const auto& s : scans)
        if (s.scan_id == target_id)
            target = &s;
    if (target == nullptr)
        throw DomainError("target scan " + std::to_string(target_id) + " not present");

    std::vector<OverlapPair> pairs;
    for (const auto& source : scans) {
        if (source.scan_id == target_id || source.empty())
            continue;
        const SpatialIndex index(source);
        const std::size_t count = overlap_count(*target, index, radius, threads);
        if (count >= min_overlap)
            pairs.push_back({source.scan_id, target_id, count});
    }
    if (pairs.empty())
        throw Error("insufficient overlap: no scan shares at least " + std::to_string(min_overlap) +
                    " points with target scan " + std::to_string(target_id));
    return pairs;
}

BuildResult build_overlap_examples(const Scan& target, const SpatialIndex& source_corrupted,
                                   const ResponseFunction& source_curve, std::span<const std::size_t> target_points,
                                   const NeighborhoodOptions& options, const XExtent& extent, int threads)
{
    std::vector<std::optional<Example>> slots(target_points.size());
    parallel_for(target_points.size(), threads, [&](std::size_t j) {
        const Point& t = target.points.at(target_points[j]);
        const Vec3 loc = t.position();
        auto neighbors = source_corrupted.query_knn(loc, options.k, options.radius);
        if (neighbors.size() < options.min_neighbors)
            return;
        Example e;
        e.neighbors = to_features(neighbors, loc);
        e.source_id = source_corrupted.scan_id();
        e.target_id = target.scan_id;
        e.gt_harm = t.intensity;
        e.gt_interp = static_cast<float>(source_curve.apply(static_cast<double>(t.intensity)));
        e.x_norm = static_cast<float>(normalize_x(t.x, extent));
        slots[j] = std::move(e);
    });
    return compact(slots);
}

BuildResult build_inscan_examples(const SpatialIndex& scan_corrupted, std::span<const std::size_t> centers,
                                  const NeighborhoodOptions& options, const XExtent& extent, int threads)
{
    std::vector<std::optional<Example>> slots(centers.size());
    const auto& points = scan_corrupted.points();
    parallel_for(centers.size(), threads, [&](std::size_t j) {
        const std::size_t c = centers[j];
        const Point& center = points.at(c);
        const Vec3 loc = center.position();
        auto neighbors = scan_corrupted.query_knn(loc, options.k + 1, options.radius);
        std::erase_if(neighbors, [c](const Neighbor& n) { return n.index == c; });
        if (neighbors.size() > options.k)
            neighbors.resize(options.k);
        if (neighbors.size() < options.min_neighbors)
            return;
        Example e;
        e.neighbors = to_features(neighbors, loc);
        e.source_id = scan_corrupted.scan_id();
        e.target_id = scan_corrupted.scan_id();
        e.gt_interp = center.intensity;
        e.gt_harm = center.intensity;
        e.x_norm = static_cast<float>(normalize_x(center.x, extent));
        slots[j] = std::move(e);
    });
    return compact(slots);
}

ResampleResult stratified_resample(std::span<const Example> examples, std::size_t n_bins,
                                   std::size_t per_bin_target, Rng& rng)
{
    if (n_bins < 2)
        throw DomainError("stratified_resample needs n_bins >= 2");
    std::map<ScanPair, std::vector<std::vector<std::size_t>>> cells;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const Example& e = examples[i];
        auto& bins = cells[{e.source_id, e.target_id}];
        if (bins.empty())
            bins.resize(n_bins);
        bins[intensity_bin(e.gt_harm, n_bins)].push_back(i);
    }

    ResampleResult result;
    for (auto& [pair, bins] : cells) {
        for (std::size_t b = 0; b < n_bins; ++b) {
            auto& members = bins[b];
            if (members.empty()) {
                result.warnings.push_back("empty cell: pair (" + std::to_string(pair.first) + "," +
                                          std::to_string(pair.second) + ") bin " + std::to_string(b));
                continue;
            }
            std::vector<std::size_t> chosen;
            if (members.size() >= per_bin_target) {
                // Partial Fisher-Yates, then restore original order.
                std::vector<std::size_t> pool = members;
                for (std::size_t i = 0; i < per_bin_target; ++i) {
                    const std::size_t j = i + uniform_index(rng, pool.size() - i);
                    std::swap(pool[i], pool[j]);
                }
                chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_bin_target));
            } else {
                chosen = members;
                while (chosen.size() < per_bin_target)
                    chosen.push_back(members[uniform_index(rng, members.size())]);
            }
            std::sort(chosen.begin(), chosen.end());
            for (std::size_t i : chosen)
                result.examples.push_back(examples[i]);
        }
    }
    return result;
}

void recount(DatasetManifest& manifest, std::span<const Example> examples, std::size_t n_bins)
{
    manifest.example_count = examples.size();
    manifest.pair_counts.clear();
    manifest.bin_counts.assign(n_bins, 0);
    for (const Example& e : examples) {
        ++manifest.pair_counts[{e.source_id, e.target_id}];
        if (n_bins > 0)
            ++manifest.bin_counts[intensity_bin(e.gt_harm, n_bins)];
    }
}

std::string manifest_to_json(const DatasetManifest& m)
{
    nlohmann::ordered_json j;
    j["example_count"] = m.example_count;
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& [pair, count] : m.pair_counts)
        pairs.push_back({{"source", pair.first}, {"target", pair.second}, {"count", count}});
    j["pairs"] = pairs;
    j["bin_counts"] = m.bin_counts;
    j["k"] = m.k;
    j["radius"] = m.radius;
    j["min_neighbors"] = m.min_neighbors;
    j["target_id"] = m.target_id;
    nlohmann::ordered_json corruption = nlohmann::ordered_json::object();
    for (const auto& [id, curve] : m.corruption)
        corruption[std::to_string(id)] = curve;
    j["corruption"] = corruption;
    j["shift"] = m.shift;
    j["split"] = {{"train", m.train_count}, {"val", m.val_count}};
    j["eval_source_id"] = m.eval_source_id;
    if (m.eval_tile)
        j["eval_tile"] = {m.eval_tile->min_x, m.eval_tile->min_y, m.eval_tile->max_x, m.eval_tile->max_y};
    j["skipped_sparse"] = m.skipped_sparse;
    j["warnings"] = m.warnings;
    j["seed"] = m.seed;
    j["payload_checksum"] = m.payload_checksum;
    return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text)
{
    DatasetManifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.example_count = j.at("example_count").get<std::size_t>();
        for (const auto& p : j.at("pairs"))
            m.pair_counts[{p.at("source").get<std::uint16_t>(), p.at("target").get<std::uint16_t>()}] =
                p.at("count").get<std::size_t>();
        m.bin_counts = j.at("bin_counts").get<std::vector<std::size_t>>();
        m.k = j.at("k").get<std::size_t>();
        m.radius = j.at("radius").get<double>();
        m.min_neighbors = j.at("min_neighbors").get<std::size_t>();
        m.target_id = j.at("target_id").get<std::uint16_t>();
        for (const auto& [key, value] : j.at("corruption").items())
            m.corruption[static_cast<std::uint16_t>(std::stoul(key))] = value.get<std::string>();
        m.shift = j.at("shift").get<bool>();
        m.train_count = j.at("split").at("train").get<std::size_t>();
        m.val_count = j.at("split").at("val").get<std::size_t>();
        m.eval_source_id = j.at("eval_source_id").get<std::uint16_t>();
        if (j.contains("eval_tile")) {
            const auto t = j.at("eval_tile").get<std::vector<double>>();
            if (t.size() != 4)
                throw FormatError("eval_tile must have 4 values");
            m.eval_tile = Box2{t[0], t[1], t[2], t[3]};
        }
        m.skipped_sparse = j.at("skipped_sparse").get<std::size_t>();
        m.warnings = j.at("warnings").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.payload_checksum = j.at("payload_checksum").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    }
    return m;
}

std::vector<char> encode_dataset(const Dataset& dataset)
{
    binary::Writer payload;
    for (const Example& e : dataset.examples) {
        if (e.neighbors.size() > UINT16_MAX)
            throw DomainError("example has too many neighbors to encode");
        payload.put<std::uint16_t>(e.source_id);
        payload.put<std::uint16_t>(e.target_id);
        payload.put<std::uint16_t>(static_cast<std::uint16_t>(e.neighbors.size()));
        for (const auto& n : e.neighbors) {
            payload.put<float>(n.dx);
            payload.put<float>(n.dy);
            payload.put<float>(n.dz);
            payload.put<float>(n.intensity);
        }
        payload.put<float>(e.gt_interp);
        payload.put<float>(e.gt_harm);
        payload.put<float>(e.x_norm);
    }
    DatasetManifest manifest = dataset.manifest;
    manifest.example_count = dataset.examples.size();
    manifest.payload_checksum = binary::fnv1a64(payload.data());
    const std::string text = manifest_to_json(manifest);

    binary::Writer w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint64_t>(dataset.examples.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
    w.put_bytes(text);
    w.data().insert(w.data().end(), payload.data().begin(), payload.data().end());
    return std::move(w.data());
}

Dataset decode_dataset(std::span<const char> bytes)
{
    binary::Reader r(bytes, "dataset");
    if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4))
        throw FormatError("dataset: bad magic at byte offset 0");
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw FormatError("dataset: unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint64_t>();
    const auto text_len = r.get<std::uint32_t>();
    const auto text = r.get_bytes(text_len);

    Dataset d;
    d.manifest = manifest_from_json(std::string(text));
    if (d.manifest.example_count != count)
        throw FormatError("dataset: corruption detected, header count " + std::to_string(count) +
                          " differs from manifest count " + std::to_string(d.manifest.example_count));
    const std::size_t payload_start = r.offset();
    // Each example takes at least 18 bytes; reject absurd counts before allocating.
    if (count > r.remaining() / 18)
        throw FormatError("dataset: truncated payload at byte offset " + std::to_string(r.offset()));
    d.examples.resize(count);
    for (auto& e : d.examples) {
        e.source_id = r.get<std::uint16_t>();
        e.target_id = r.get<std::uint16_t>();
        const auto n = r.get<std::uint16_t>();
        r.require(static_cast<std::size_t>(n) * 16 + 12);
        e.neighbors.resize(n);
        for (auto& nb : e.neighbors) {
            nb.dx = r.get<float>();
            nb.dy = r.get<float>();
            nb.dz = r.get<float>();
            nb.intensity = r.get<float>();
        }
        e.gt_interp = r.get<float>();
        e.gt_harm = r.get<float>();
        e.x_norm = r.get<float>();
    }
    if (r.remaining() != 0)
        throw FormatError("dataset: corruption detected, trailing bytes at byte offset " + std::to_string(r.offset()));
    const auto checksum = binary::fnv1a64(bytes.subspan(payload_start));
    if (checksum != d.manifest.payload_checksum)
        throw FormatError("dataset: corruption detected, payload checksum mismatch");

    DatasetManifest check = d.manifest;
    recount(check, d.examples, d.manifest.bin_counts.size());
    if (check.bin_counts != d.manifest.bin_counts || check.pair_counts != d.manifest.pair_counts)
        throw FormatError("dataset: corruption detected, manifest counts disagree with payload");
    if (d.manifest.train_count + d.manifest.val_count != count)
        throw FormatError("dataset: corruption detected, split counts do not sum to example count");
    return d;
}

void save_dataset(const Dataset& dataset, const std::string& path)
{
    binary::write_file(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::string& path)
{
    const auto bytes = binary::read_file(path);
    try {
        return decode_dataset(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace lidarharm
