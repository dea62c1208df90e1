#include "lidarharm/synth.hpp"

#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <numbers>

#include "lidarharm/error.hpp"
#include "lidarharm/random.hpp"

namespace lidarharm {

namespace {

struct BuildingBox {
    double x0, y0, x1, y1, height;
};

struct Tree {
    double cx, cy, radius, crown;
};

/// Smooth stationary Gaussian-like field from random Fourier features.
class SmoothField {
public:
    SmoothField(Rng& rng, double length, int n_features = 48)
    {
        freq_.resize(static_cast<std::size_t>(n_features));
        phase_.resize(static_cast<std::size_t>(n_features));
        for (int f = 0; f < n_features; ++f) {
            for (auto& w : freq_[static_cast<std::size_t>(f)])
                w = standard_normal(rng) / length;
            phase_[static_cast<std::size_t>(f)] = 2.0 * std::numbers::pi * uniform01(rng);
        }
        scale_ = std::sqrt(2.0 / n_features);
    }

    double operator()(double x, double y, double z) const
    {
        double sum = 0.0;
        for (std::size_t f = 0; f < freq_.size(); ++f)
            sum += std::cos(freq_[f][0] * x + freq_[f][1] * y + freq_[f][2] * z + phase_[f]);
        return scale_ * sum;
    }

private:
    std::vector<std::array<double, 3>> freq_;
    std::vector<double> phase_;
    double scale_ = 1.0;
};

double terrain(double x, double y)
{
    return 0.5 * std::sin(x / 37.0) + 0.4 * std::cos(y / 23.0);
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

} // namespace

void validate(const SceneSpec& spec)
{
    if (!(spec.x_size > 0.0) || !(spec.y_size > 0.0))
        throw DomainError("scene extent must have positive area");
    if (!(spec.density > 0.0))
        throw DomainError("scene density must be positive");
    if (spec.n_strips < 2 || spec.n_strips > static_cast<int>(kDictionarySize))
        throw DomainError("n_strips must lie in [2, 45]");
    if (!(spec.strip_overlap > 0.0 && spec.strip_overlap < 1.0))
        throw DomainError("strip_overlap must lie in (0, 1)");
    if (spec.jitter < 0.0)
        throw DomainError("jitter must be non-negative");
    const auto& m = spec.mix;
    if (m.ground < 0.0 || m.building < 0.0 || m.vegetation < 0.0 || m.ground + m.building + m.vegetation <= 0.0)
        throw DomainError("feature mix must be non-negative with a positive sum");
    if (!(spec.correlation_length > 0.0))
        throw DomainError("correlation_length must be positive");
    if (!(spec.nugget >= 0.0 && spec.nugget <= 1.0))
        throw DomainError("nugget must lie in [0, 1]");
}

ClassRange class_range(SurfaceClass c)
{
    switch (c) {
    case SurfaceClass::ground:
        return {2.0, 2.0, 0.2, 0.6};
    case SurfaceClass::building:
        return {5.0, 2.0, 0.4, 0.95};
    case SurfaceClass::vegetation:
        return {2.0, 5.0, 0.05, 0.5};
    }
    return {2.0, 2.0, 0.2, 0.6};
}

Scan generate_world(const SceneSpec& spec)
{
    validate(spec);
    Rng layout_rng = make_rng(spec.seed, {1});
    const double area = spec.x_size * spec.y_size;
    const double mix_sum = spec.mix.ground + spec.mix.building + spec.mix.vegetation;

    std::vector<BuildingBox> buildings;
    {
        constexpr double mean_side = 16.0;
        const auto count = static_cast<std::size_t>(
            std::llround(spec.mix.building / mix_sum * area / (mean_side * mean_side)));
        for (std::size_t b = 0; b < count; ++b) {
            const double w = 8.0 + 16.0 * uniform01(layout_rng);
            const double h = 8.0 + 16.0 * uniform01(layout_rng);
            const double x0 = uniform01(layout_rng) * spec.x_size - 0.5 * w;
            const double y0 = uniform01(layout_rng) * spec.y_size - 0.5 * h;
            buildings.push_back({x0, y0, x0 + w, y0 + h, 4.0 + 16.0 * uniform01(layout_rng)});
        }
    }
    std::vector<Tree> trees;
    {
        constexpr double mean_radius = 3.0;
        const double mean_area = std::numbers::pi * (mean_radius * mean_radius + 1.0 / 3.0 * 1.5 * 1.5);
        const auto count =
            static_cast<std::size_t>(std::llround(spec.mix.vegetation / mix_sum * area / mean_area));
        for (std::size_t t = 0; t < count; ++t) {
            const double r = 1.5 + 3.0 * uniform01(layout_rng);
            trees.push_back({uniform01(layout_rng) * spec.x_size, uniform01(layout_rng) * spec.y_size, r,
                             3.0 + 9.0 * uniform01(layout_rng)});
        }
    }

    Rng field_rng = make_rng(spec.seed, {2});
    const SmoothField fields[3] = {SmoothField(field_rng, spec.correlation_length),
                                   SmoothField(field_rng, spec.correlation_length),
                                   SmoothField(field_rng, spec.correlation_length)};
    const double field_weight = std::sqrt(1.0 - spec.nugget);
    const double nugget_weight = std::sqrt(spec.nugget);

    Rng point_rng = make_rng(spec.seed, {3});
    const std::uint64_t n = poisson(point_rng, spec.density * area);
    Scan world;
    world.scan_id = 0;
    world.points.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Point p;
        p.x = uniform01(point_rng) * spec.x_size;
        p.y = uniform01(point_rng) * spec.y_size;
        const double ground_z = terrain(p.x, p.y);
        SurfaceClass cls = SurfaceClass::ground;
        p.z = ground_z;
        for (const auto& b : buildings) {
            if (p.x >= b.x0 && p.x <= b.x1 && p.y >= b.y0 && p.y <= b.y1) {
                cls = SurfaceClass::building;
                p.z = ground_z + b.height;
                break;
            }
        }
        if (cls == SurfaceClass::ground) {
            for (const auto& t : trees) {
                const double dx = p.x - t.cx;
                const double dy = p.y - t.cy;
                if (dx * dx + dy * dy <= t.radius * t.radius) {
                    cls = SurfaceClass::vegetation;
                    p.z = ground_z + t.crown * (0.4 + 0.6 * uniform01(point_rng));
                    break;
                }
            }
        }
        const double white = standard_normal(point_rng);
        const auto c = static_cast<std::size_t>(cls);
        const double g = field_weight * fields[c](p.x, p.y, p.z) + nugget_weight * white;
        const double u = std::clamp(normal_cdf(g), 1e-12, 1.0 - 1e-12);
        const ClassRange range = class_range(cls);
        const boost::math::beta_distribution<double> dist(range.alpha, range.beta);
        const double q = boost::math::quantile(dist, u);
        p.intensity = static_cast<float>(range.lo + (range.hi - range.lo) * q);
        p.intensity = std::clamp(p.intensity, static_cast<float>(range.lo), static_cast<float>(range.hi));
        world.points.push_back(p);
    }
    return world;
}

StripLayout strip_layout(const SceneSpec& spec)
{
    validate(spec);
    StripLayout layout;
    const double o = spec.strip_overlap;
    const int n = spec.n_strips;
    layout.width = spec.strip_width > 0.0 ? spec.strip_width : spec.x_size / (1.0 + (n - 1) * (1.0 - o));
    layout.step = layout.width * (1.0 - o);
    const double span = (n - 1) * layout.step + layout.width;
    if (span > spec.x_size * (1.0 + 1e-12))
        throw DomainError("strips exceed the scene extent (span " + std::to_string(span) + " m > " +
                          std::to_string(spec.x_size) + " m)");
    if (span < spec.x_size * (1.0 - 1e-12))
        throw DomainError("strips do not cover the scene extent");
    for (int j = 0; j < n; ++j) {
        const double lo = j == 0 ? 0.0 : j * layout.step;
        const double hi = j == n - 1 ? spec.x_size : j * layout.step + layout.width;
        layout.ranges.emplace_back(lo, hi);
    }
    return layout;
}

std::vector<Scan> cut_strips(const Scan& world, const SceneSpec& spec)
{
    const StripLayout layout = strip_layout(spec);
    const auto n = static_cast<std::size_t>(spec.n_strips);
    std::vector<Scan> strips(n);
    std::vector<Rng> jitter_rngs;
    for (std::size_t j = 0; j < n; ++j) {
        strips[j].scan_id = static_cast<std::uint16_t>(j);
        jitter_rngs.push_back(make_rng(spec.seed, {4, j}));
    }
    std::vector<std::size_t> members;
    for (const Point& p : world.points) {
        members.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (p.x >= layout.ranges[j].first && p.x <= layout.ranges[j].second)
                members.push_back(j);
        if (members.empty())
            members.push_back(p.x < 0.0 ? 0 : n - 1);
        for (std::size_t j : members) {
            Point q = p;
            if (members.size() > 1 && spec.jitter > 0.0) {
                q.x += spec.jitter * standard_normal(jitter_rngs[j]);
                q.y += spec.jitter * standard_normal(jitter_rngs[j]);
                q.z += spec.jitter * standard_normal(jitter_rngs[j]);
            }
            strips[j].points.push_back(q);
        }
    }
    return strips;
}

} // namespace lidarharm
