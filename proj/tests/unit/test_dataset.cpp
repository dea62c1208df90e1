#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/dataset.hpp"
#include "lidarharm/error.hpp"

using namespace lidarharm;

namespace {

Scan grid_scan(std::uint16_t id, double x0, double x1, double step, double jitter_seed, float value = -1.0f)
{
    Scan s;
    s.scan_id = id;
    Rng rng = make_rng(static_cast<std::uint64_t>(jitter_seed), {id});
    for (double x = x0; x <= x1; x += step)
        for (double y = 0; y <= 6; y += step) {
            const float v = value >= 0.0f ? value : static_cast<float>(0.05 + 0.9 * uniform01(rng));
            s.points.push_back({x + 0.01 * uniform01(rng), y + 0.01 * uniform01(rng), 0.0, v});
        }
    return s;
}

std::vector<std::size_t> all_indices(const Scan& s)
{
    std::vector<std::size_t> v(s.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = i;
    return v;
}

Example make_example(std::uint16_t s, std::uint16_t t, float harm, std::size_t n = 3)
{
    Example e;
    e.source_id = s;
    e.target_id = t;
    e.gt_harm = harm;
    e.gt_interp = harm;
    for (std::size_t j = 0; j < n; ++j)
        e.neighbors.push_back({0.1f * static_cast<float>(j), 0.0f, 0.0f, harm});
    return e;
}

Dataset random_dataset(std::size_t n)
{
    Rng rng = make_rng(3, {});
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        Example e = make_example(static_cast<std::uint16_t>(uniform_index(rng, 3)), 1,
                                 static_cast<float>(uniform01(rng)), 1 + uniform_index(rng, 20));
        for (auto& f : e.neighbors)
            f = {static_cast<float>(uniform01(rng)), static_cast<float>(uniform01(rng)),
                 static_cast<float>(uniform01(rng)), static_cast<float>(uniform01(rng))};
        e.x_norm = static_cast<float>(uniform01(rng));
        d.examples.push_back(std::move(e));
    }
    d.manifest.train_count = n - n / 10;
    d.manifest.val_count = n / 10;
    d.manifest.corruption = {{0, "gamma:2"}, {1, "identity"}};
    d.manifest.eval_tile = Box2{1, 2, 3, 4};
    d.manifest.warnings = {"empty cell: pair (2,1) bin 9"};
    recount(d.manifest, d.examples, 10);
    return d;
}

} // namespace

TEST(OverlapPairs, DisjointScansThrow)
{
    const std::vector<Scan> scans = {grid_scan(0, 0, 5, 0.5, 1), grid_scan(1, 20, 25, 0.5, 1)};
    try {
        find_overlap_pairs(scans, 1, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient overlap"), std::string::npos);
    }
}

TEST(OverlapPairs, HalfOverlapGivesOnePairAndExcludesSelf)
{
    const std::vector<Scan> scans = {grid_scan(0, 0, 10, 0.5, 1), grid_scan(1, 5, 15, 0.5, 2)};
    const auto pairs = find_overlap_pairs(scans, 1, 10);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].source_id, 0);
    EXPECT_EQ(pairs[0].target_id, 1);
    EXPECT_EQ(pairs[0].overlap, overlap_count(scans[1], SpatialIndex(scans[0]), 1.0));
}

TEST(OverlapExamples, IdentityAndGamma)
{
    const Scan target = grid_scan(1, 0, 4, 0.25, 5);
    const Scan source = grid_scan(0, 0, 4, 0.25, 6);
    const SpatialIndex idx(source);
    const auto centers = all_indices(target);
    const NeighborhoodOptions opts{150, 1.0, 10};
    const XExtent extent{0, 4};

    const auto ident = build_overlap_examples(target, idx, ResponseFunction::identity(), centers, opts, extent);
    ASSERT_FALSE(ident.examples.empty());
    for (const Example& e : ident.examples) {
        EXPECT_EQ(e.gt_interp, e.gt_harm);
        EXPECT_NE(e.source_id, e.target_id);
        EXPECT_GE(e.neighbors.size(), 10u);
        EXPECT_LE(e.neighbors.size(), 150u);
        for (const auto& f : e.neighbors)
            EXPECT_LE(std::sqrt(double(f.dx) * f.dx + double(f.dy) * f.dy + double(f.dz) * f.dz), 1.0 + 1e-6);
    }

    const ResponseFunction g(GammaCurve{2.0});
    const auto gamma = build_overlap_examples(target, idx, g, centers, opts, extent);
    for (const Example& e : gamma.examples)
        EXPECT_NEAR(e.gt_interp, g.apply(e.gt_harm), 1e-6);

    Scan half = target;
    half.points[0].intensity = 0.5f;
    const std::size_t first = 0;
    const auto one = build_overlap_examples(half, idx, g, std::span(&first, 1), opts, extent);
    ASSERT_EQ(one.examples.size(), 1u);
    EXPECT_FLOAT_EQ(one.examples[0].gt_interp, 0.25f);
}

TEST(OverlapExamples, SparseNeighborhoodsSkipped)
{
    const Scan target = grid_scan(1, 0, 4, 0.25, 5);
    const Scan source = grid_scan(0, 0, 4, 2.0, 6);
    const auto r = build_overlap_examples(target, SpatialIndex(source), ResponseFunction::identity(),
                                          all_indices(target), {150, 1.0, 10}, {0, 4});
    EXPECT_TRUE(r.examples.empty());
    EXPECT_EQ(r.skipped_sparse, target.size());
}

TEST(OverlapExamples, ThreadCountDoesNotChangeOutput)
{
    const Scan target = grid_scan(1, 0, 4, 0.25, 5);
    const SpatialIndex idx(grid_scan(0, 0, 4, 0.25, 6));
    const auto a = build_overlap_examples(target, idx, ResponseFunction(GammaCurve{0.5}), all_indices(target),
                                          {150, 1.0, 10}, {0, 4}, 1);
    const auto b = build_overlap_examples(target, idx, ResponseFunction(GammaCurve{0.5}), all_indices(target),
                                          {150, 1.0, 10}, {0, 4}, 4);
    EXPECT_EQ(a.examples, b.examples);
}

TEST(InscanExamples, CenterRemovedAndIdsEqual)
{
    const Scan scan = grid_scan(2, 0, 4, 0.25, 7);
    const SpatialIndex idx(scan);
    const auto centers = all_indices(scan);
    const auto r = build_inscan_examples(idx, centers, {150, 1.0, 10}, {0, 4});
    ASSERT_FALSE(r.examples.empty());
    for (const Example& e : r.examples) {
        EXPECT_EQ(e.source_id, e.target_id);
        EXPECT_EQ(e.gt_interp, e.gt_harm);
        for (const auto& f : e.neighbors)
            EXPECT_FALSE(f.dx == 0.0f && f.dy == 0.0f && f.dz == 0.0f);
    }
    const std::size_t c = 40;
    const auto one = build_inscan_examples(idx, std::span(&c, 1), {150, 1.0, 10}, {0, 4});
    ASSERT_EQ(one.examples.size(), 1u);
    EXPECT_EQ(one.examples[0].gt_harm, scan.points[c].intensity);
}

TEST(Resample, AlreadyBalancedUnchanged)
{
    std::vector<Example> ex;
    for (int b = 0; b < 10; ++b)
        for (int r = 0; r < 3; ++r)
            ex.push_back(make_example(0, 1, (b + 0.5f) / 10.0f, static_cast<std::size_t>(r + 1)));
    Rng rng = make_rng(1, {});
    const auto out = stratified_resample(ex, 10, 3, rng);
    EXPECT_EQ(out.examples, ex);
    EXPECT_TRUE(out.warnings.empty());
}

TEST(Resample, SingleExampleRepeated)
{
    const std::vector<Example> ex = {make_example(0, 1, 0.55f)};
    Rng rng = make_rng(1, {});
    const auto out = stratified_resample(ex, 10, 10, rng);
    ASSERT_EQ(out.examples.size(), 10u);
    for (const auto& e : out.examples)
        EXPECT_EQ(e, ex[0]);
    EXPECT_EQ(out.warnings.size(), 9u);
}

TEST(Resample, FlatHistogramPerCell)
{
    Rng data = make_rng(2, {});
    std::vector<Example> ex;
    for (int i = 0; i < 3000; ++i) {
        const double u = uniform01(data);
        ex.push_back(make_example(static_cast<std::uint16_t>(uniform_index(data, 2)), 1,
                                  static_cast<float>(u * u)));
    }
    Rng rng = make_rng(1, {});
    const auto out = stratified_resample(ex, 10, 50, rng);
    DatasetManifest m;
    recount(m, out.examples, 10);
    std::map<std::pair<ScanPair, std::size_t>, std::size_t> cells;
    for (const auto& e : out.examples)
        ++cells[{{e.source_id, e.target_id}, intensity_bin(e.gt_harm, 10)}];
    for (const auto& [cell, count] : cells)
        EXPECT_EQ(count, 50u);
    std::size_t sum = 0;
    for (auto c : m.bin_counts)
        sum += c;
    EXPECT_EQ(sum, out.examples.size());
}

TEST(Resample, NeedsTwoBins)
{
    Rng rng = make_rng(1, {});
    EXPECT_THROW(stratified_resample({}, 1, 5, rng), DomainError);
}

TEST(DatasetIo, RoundTripBitExact)
{
    const Dataset d = random_dataset(10000);
    const auto bytes = encode_dataset(d);
    const Dataset back = decode_dataset(bytes);
    EXPECT_EQ(back.examples, d.examples);
    EXPECT_EQ(encode_dataset(back), bytes);
    EXPECT_EQ(back.manifest.bin_counts, d.manifest.bin_counts);
    EXPECT_EQ(back.manifest.pair_counts, d.manifest.pair_counts);
    EXPECT_EQ(back.manifest.eval_tile, d.manifest.eval_tile);
    EXPECT_EQ(back.manifest.corruption, d.manifest.corruption);
    EXPECT_EQ(back.train().size() + back.val().size(), d.examples.size());

    const auto path = std::filesystem::temp_directory_path() / "lidarharm_test_dataset.lhd";
    save_dataset(d, path.string());
    EXPECT_EQ(load_dataset(path.string()).examples, d.examples);
    std::filesystem::remove(path);
}

TEST(DatasetIo, TruncatedReportsOffset)
{
    auto bytes = encode_dataset(random_dataset(50));
    bytes.resize(bytes.size() - 7);
    try {
        decode_dataset(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
}

TEST(DatasetIo, ChecksumMismatchDetected)
{
    auto bytes = encode_dataset(random_dataset(50));
    bytes[bytes.size() - 3] ^= 0x40;
    EXPECT_THROW(decode_dataset(bytes), FormatError);
}

TEST(DatasetIo, ManifestCountsMatchRecount)
{
    const Dataset d = random_dataset(500);
    DatasetManifest m;
    recount(m, d.examples, 10);
    EXPECT_EQ(m.bin_counts, d.manifest.bin_counts);
    EXPECT_EQ(m.pair_counts, d.manifest.pair_counts);
}
