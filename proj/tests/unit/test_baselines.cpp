#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lidarharm/baselines.hpp"
#include "lidarharm/error.hpp"
#include "lidarharm/random.hpp"

using namespace lidarharm;

TEST(Interpolate, NearestLinearCubicBasics)
{
    const std::vector<Vec3> pos = {Vec3{1, 0, 0}, Vec3{-0.5, 0, 0}, Vec3{0, 2, 0}};
    const std::vector<double> val = {0.2, 0.6, 0.9};
    const Vec3 origin{0, 0, 0};
    EXPECT_EQ(interpolate(InterpMethod::nearest, pos, val, origin).value, 0.6);
    // weights 1, 4, 0.25
    EXPECT_NEAR(interpolate(InterpMethod::linear, pos, val, origin).value, (0.2 + 2.4 + 0.225) / 5.25, 1e-12);
    const InterpResult c = interpolate(InterpMethod::cubic, pos, val, origin);
    EXPECT_FALSE(c.fallback);
    EXPECT_GE(c.value, 0.0);
    EXPECT_LE(c.value, 1.0);
}

TEST(Interpolate, CoincidentAndSingleNeighbor)
{
    const std::vector<Vec3> pos = {Vec3{0.5, 0, 0}, Vec3{0, 0, 0}};
    const std::vector<double> val = {0.1, 0.8};
    for (auto m : {InterpMethod::nearest, InterpMethod::linear, InterpMethod::cubic})
        EXPECT_EQ(interpolate(m, pos, val, Vec3{0, 0, 0}).value, 0.8) << to_string(m);
    const std::vector<Vec3> one = {Vec3{0.3, 0.1, 0}};
    const std::vector<double> v1 = {0.42};
    for (auto m : {InterpMethod::nearest, InterpMethod::linear, InterpMethod::cubic})
        EXPECT_EQ(interpolate(m, one, v1, Vec3{0, 0, 0}).value, 0.42);
}

TEST(Interpolate, CubicReproducesSitesAndConstants)
{
    Rng rng = make_rng(1, {});
    std::vector<Vec3> pos;
    std::vector<double> val;
    for (int i = 0; i < 8; ++i) {
        pos.push_back({uniform01(rng), uniform01(rng), 0.1 * uniform01(rng)});
        val.push_back(0.37);
    }
    EXPECT_NEAR(interpolate(InterpMethod::cubic, pos, val, Vec3{0.5, 0.5, 0}).value, 0.37, 1e-9);
    EXPECT_NEAR(interpolate(InterpMethod::linear, pos, val, Vec3{0.5, 0.5, 0}).value, 0.37, 1e-12);
}

TEST(Interpolate, CubicSingularFallsBack)
{
    const std::vector<Vec3> pos = {Vec3{1, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    const std::vector<double> val = {0.2, 0.4, 0.6};
    const InterpResult r = interpolate(InterpMethod::cubic, pos, val, Vec3{0, 0, 0});
    EXPECT_TRUE(r.fallback);
    EXPECT_NEAR(r.value, interpolate(InterpMethod::linear, pos, val, Vec3{0, 0, 0}).value, 1e-12);
}

TEST(Interpolate, PermutationInvariant)
{
    Rng rng = make_rng(2, {});
    std::vector<NeighborFeature> nb;
    for (int i = 0; i < 12; ++i)
        nb.push_back({static_cast<float>(uniform01(rng) - 0.5), static_cast<float>(uniform01(rng) - 0.5),
                      static_cast<float>(0.1 * uniform01(rng)), static_cast<float>(uniform01(rng))});
    for (auto m : {InterpMethod::nearest, InterpMethod::linear, InterpMethod::cubic}) {
        const double a = interpolate(m, nb).value;
        auto shuffled = nb;
        std::reverse(shuffled.begin(), shuffled.end());
        EXPECT_NEAR(interpolate(m, shuffled).value, a, 1e-9) << to_string(m);
    }
}

TEST(Interpolate, MethodNames)
{
    EXPECT_EQ(parse_interp_method("cubic"), InterpMethod::cubic);
    EXPECT_EQ(to_string(InterpMethod::nearest), "nearest");
    EXPECT_THROW(parse_interp_method("spline"), Error);
}

TEST(Affine, RecoversExactLine)
{
    std::vector<double> i, h;
    for (int k = 0; k <= 20; ++k) {
        i.push_back(k / 20.0);
        h.push_back(0.7 * k / 20.0 + 0.1);
    }
    const AffineHead a = fit_affine(i, h);
    EXPECT_NEAR(a.a, 0.7, 1e-12);
    EXPECT_NEAR(a.b, 0.1, 1e-12);
    const AffineHead id = fit_affine(i, i);
    EXPECT_NEAR(id.a, 1.0, 1e-12);
    EXPECT_NEAR(id.b, 0.0, 1e-12);
}

TEST(Affine, ResidualsOrthogonal)
{
    Rng rng = make_rng(3, {});
    std::vector<double> i, h;
    for (int k = 0; k < 200; ++k) {
        i.push_back(uniform01(rng));
        h.push_back(std::sqrt(i.back()) + 0.05 * uniform01(rng));
    }
    const AffineHead a = fit_affine(i, h);
    double s1 = 0, si = 0;
    for (std::size_t k = 0; k < i.size(); ++k) {
        const double r = h[k] - a.apply(i[k]);
        s1 += r;
        si += r * i[k];
    }
    EXPECT_NEAR(s1, 0.0, 1e-9);
    EXPECT_NEAR(si, 0.0, 1e-9);
}

TEST(Affine, DegenerateRejected)
{
    const std::vector<double> c(5, 0.3), h = {0.1, 0.2, 0.3, 0.4, 0.5};
    try {
        fit_affine(c, h);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
    }
    EXPECT_THROW(fit_affine(std::vector<double>{0.1}, std::vector<double>{0.1}), DomainError);
}

namespace {

std::vector<float> uniform_sample(std::size_t n, std::uint64_t seed)
{
    Rng rng = make_rng(seed, {});
    std::vector<float> v(n);
    for (float& x : v)
        x = static_cast<float>(uniform01(rng));
    return v;
}

} // namespace

TEST(HistMatch, IdentityWhenDistributionsMatch)
{
    const auto a = uniform_sample(50000, 1);
    const HistMatchLUT lut = build_histmatch(a, a);
    ASSERT_EQ(lut.centers.size(), 256u);
    for (std::size_t b = 0; b < 256; ++b)
        EXPECT_NEAR(lut.values[b], lut.centers[b], 1.0 / 256) << b;
}

TEST(HistMatch, HalvingMap)
{
    const auto a = uniform_sample(50000, 2);
    std::vector<float> t = uniform_sample(50000, 3);
    for (float& x : t)
        x *= 0.5f;
    const HistMatchLUT lut = build_histmatch(a, t);
    for (double x : {0.1, 0.3, 0.5, 0.8})
        EXPECT_NEAR(apply_lut(lut, x), 0.5 * x, 0.01) << x;
    for (std::size_t b = 1; b < lut.values.size(); ++b)
        EXPECT_GE(lut.values[b], lut.values[b - 1]);
}

TEST(HistMatch, ConstantTarget)
{
    const auto a = uniform_sample(1000, 4);
    const std::vector<float> t(300, 0.7f);
    const HistMatchLUT lut = build_histmatch(a, t);
    for (double x : {0.0, 0.25, 0.5, 1.0})
        EXPECT_NEAR(apply_lut(lut, x), 0.7, 1e-6);
}

TEST(HistMatch, ReducesHistogramDistance)
{
    const auto a = uniform_sample(20000, 5);
    std::vector<float> t = uniform_sample(20000, 6);
    for (float& x : t)
        x = x * x;
    const HistMatchLUT lut = build_histmatch(a, t);
    std::vector<float> mapped;
    for (float x : a)
        mapped.push_back(static_cast<float>(apply_lut(lut, x)));
    EXPECT_LE(histogram_distance(mapped, t), histogram_distance(a, t));
    EXPECT_NEAR(histogram_distance(a, a), 0.0, 1e-12);
}

TEST(HistMatch, EmptyInputRejected)
{
    EXPECT_THROW(build_histmatch({}, uniform_sample(10, 1)), DomainError);
}

TEST(MlpHead, LearnsIdentity)
{
    Rng rng = make_rng(7, {});
    std::vector<HeadPair> pairs;
    for (int k = 0; k < 5000; ++k) {
        const double v = uniform01(rng);
        pairs.push_back({v, v, 1, 1});
    }
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.schedule.lr_max = 1e-2;
    cfg.schedule.peak_decay = 0.05;
    const MlpHead head = fit_mlp_head(pairs, cfg);
    double err = 0;
    for (int k = 0; k <= 100; ++k)
        err += std::abs(apply_mlp_head(head.params, k / 100.0, 1, 1) - k / 100.0);
    EXPECT_LE(err / 101, 0.02);
}

TEST(MlpHead, TooFewPairsRejected)
{
    const std::vector<HeadPair> pairs(50, HeadPair{0.5, 0.5, 0, 1});
    EXPECT_THROW(fit_mlp_head(pairs, {}), DomainError);
}
