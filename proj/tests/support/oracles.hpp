#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's index or network code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "lidarharm/network.hpp"
#include "lidarharm/pointcloud.hpp"
#include "lidarharm/random.hpp"
#include "lidarharm/spatial_index.hpp"

namespace oracle {

using namespace lidarharm;

/// Exhaustive k-nearest search with the same ordering contract: ascending
/// squared distance, ties by lower index, radius inclusive.
inline std::vector<std::uint32_t> knn(std::span<const Point> points, const Vec3& loc, std::size_t k, double radius)
{
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        const double d2 = squared_distance(points[i].position(), loc);
        if (d2 <= radius * radius)
            all.emplace_back(d2, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> out;
    for (std::size_t j = 0; j < std::min(k, all.size()); ++j)
        out.push_back(all[j].second);
    return out;
}

inline std::size_t overlap_count(std::span<const Point> a, std::span<const Point> b, double radius)
{
    std::size_t n = 0;
    for (const Point& p : a)
        for (const Point& q : b)
            if (squared_distance(p.position(), q.position()) <= radius * radius) {
                ++n;
                break;
            }
    return n;
}

/// Straight-line evaluation of the network from the flat parameter vector,
/// with scalar loops only.
struct Reference {
    double interp = 0.0;
    double harmonized = 0.0;
};

inline Reference forward(const ParamSet& p, std::span<const NeighborFeature> nb, std::uint16_t s, std::uint16_t t,
                         const std::vector<double>* head_mask = nullptr)
{
    auto blk = [&](const char* name) { return p.block(p.block_index(name)); };
    auto dims = [&](const char* name) { return p.layout()[p.block_index(name)]; };
    auto relu = [](double v) { return v > 0.0 ? v : 0.0; };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };

    const auto w1 = blk("pointnet.w1"), b1 = blk("pointnet.b1"), w2 = blk("pointnet.w2"), b2 = blk("pointnet.b2");
    const auto w3 = blk("pointnet.w3"), b3 = blk("pointnet.b3"), w4 = blk("pointnet.w4"), b4 = blk("pointnet.b4");
    const std::size_t h1 = dims("pointnet.w1").rows, h2 = dims("pointnet.w2").rows, h3 = dims("pointnet.w3").rows;

    std::vector<double> pooled(h2, -1.0);
    for (const NeighborFeature& f : nb) {
        const double x[4] = {f.dx, f.dy, f.dz, f.intensity};
        std::vector<double> a1(h1);
        for (std::size_t r = 0; r < h1; ++r) {
            double acc = b1[r];
            for (std::size_t c = 0; c < 4; ++c)
                acc += w1[r * 4 + c] * x[c];
            a1[r] = relu(acc);
        }
        for (std::size_t r = 0; r < h2; ++r) {
            double acc = b2[r];
            for (std::size_t c = 0; c < h1; ++c)
                acc += w2[r * h1 + c] * a1[c];
            pooled[r] = std::max(pooled[r], relu(acc));
        }
    }
    double z4 = b4[0];
    for (std::size_t r = 0; r < h3; ++r) {
        double acc = b3[r];
        for (std::size_t c = 0; c < h2; ++c)
            acc += w3[r * h2 + c] * pooled[c];
        z4 += w4[r] * relu(acc);
    }
    Reference out;
    out.interp = sig(z4);

    const auto emb = blk("embedding"), hw1 = blk("head.w1"), hb1 = blk("head.b1"), hw2 = blk("head.w2");
    const auto hb2 = blk("head.b2");
    const std::size_t dim = dims("embedding").cols, hidden = dims("head.w1").rows;
    std::vector<double> in(1 + dim);
    in[0] = out.interp;
    for (std::size_t d = 0; d < dim; ++d)
        in[1 + d] = emb[s * dim + d] - emb[t * dim + d];
    double zo = hb2[0];
    for (std::size_t r = 0; r < hidden; ++r) {
        double acc = hb1[r];
        for (std::size_t c = 0; c < 1 + dim; ++c)
            acc += hw1[r * (1 + dim) + c] * in[c];
        const double m = head_mask != nullptr ? (*head_mask)[r] : 1.0;
        zo += hw2[r] * relu(acc) * m;
    }
    out.harmonized = sig(zo);
    return out;
}

inline std::vector<NeighborFeature> random_neighbors(Rng& rng, std::size_t n, double radius = 1.0)
{
    std::vector<NeighborFeature> out(n);
    for (auto& f : out) {
        f.dx = static_cast<float>(radius * (2.0 * uniform01(rng) - 1.0) / std::sqrt(3.0));
        f.dy = static_cast<float>(radius * (2.0 * uniform01(rng) - 1.0) / std::sqrt(3.0));
        f.dz = static_cast<float>(radius * (2.0 * uniform01(rng) - 1.0) / std::sqrt(3.0));
        f.intensity = static_cast<float>(uniform01(rng));
    }
    return out;
}

/// Parameters perturbed away from the zero-bias initialization so every
/// block (biases included) carries a non-trivial value.
inline ParamSet random_params(std::uint64_t seed, const ModelShape& shape = {})
{
    ParamSet p(model_layout(shape));
    initialize_params(p, seed);
    Rng rng = make_rng(seed, {99});
    for (double& v : p.values())
        v += 0.05 * standard_normal(rng);
    return p;
}

/// ReLU sign pattern plus max-pool winners: finite differences are only
/// meaningful when this is identical at theta - eps, theta and theta + eps.
inline std::vector<std::int64_t> activation_pattern(const ForwardTrace& t)
{
    std::vector<std::int64_t> pat;
    for (Eigen::Index i = 0; i < t.pre1.size(); ++i)
        pat.push_back(t.pre1.data()[i] > 0.0);
    for (Eigen::Index i = 0; i < t.pre2.size(); ++i)
        pat.push_back(t.pre2.data()[i] > 0.0);
    for (auto a : t.argmax)
        pat.push_back(a);
    for (Eigen::Index i = 0; i < t.pre3.size(); ++i)
        pat.push_back(t.pre3[i] > 0.0);
    for (Eigen::Index i = 0; i < t.head.pre.size(); ++i)
        pat.push_back(t.head.pre[i] > 0.0);
    return pat;
}

struct GradCheck {
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
    std::size_t failures = 0;
    double worst_rel = 0.0;
};

/// Compares backward() against central differences of the L2 joint loss,
/// replaying the same dropout mask. |a - b| <= rel * max(|a|, |b|) + abs_floor.
inline GradCheck check_gradient(const ParamSet& params, const Example& ex, double eps = 1e-5, double rel = 1e-3,
                                double abs_floor = 1e-7)
{
    GradCheck out;
    Rng rng = make_rng(1234, {ex.neighbors.size()});
    ForwardTrace base;
    const DropoutControl train_mode{Mode::train, 0.3, &rng, nullptr};
    const Prediction p = forward(params, ex, train_mode, base);
    const Eigen::VectorXd mask = base.head.mask;
    const DropoutControl replay{Mode::train, 0.3, nullptr, &mask};

    ParamSet grad(params.layout());
    backward(params, base, rho_grad(p.interp, ex.gt_interp, LossKind::l2),
             rho_grad(p.harmonized, ex.gt_harm, LossKind::l2), grad);
    const auto pattern = activation_pattern(base);

    ParamSet probe = params;
    ForwardTrace t;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = probe.values()[i];
        probe.values()[i] = orig + eps;
        const Prediction up = forward(probe, ex, replay, t);
        const bool same_up = activation_pattern(t) == pattern;
        probe.values()[i] = orig - eps;
        const Prediction dn = forward(probe, ex, replay, t);
        const bool same_dn = activation_pattern(t) == pattern;
        probe.values()[i] = orig;
        if (!same_up || !same_dn) {
            ++out.skipped_kinks;
            continue;
        }
        const double lu = loss(up.interp, up.harmonized, ex.gt_interp, ex.gt_harm, LossKind::l2).total;
        const double ld = loss(dn.interp, dn.harmonized, ex.gt_interp, ex.gt_harm, LossKind::l2).total;
        const double fd = (lu - ld) / (2.0 * eps);
        const double an = grad.values()[i];
        const double scale = std::max(std::abs(fd), std::abs(an));
        ++out.checked;
        if (std::abs(fd - an) > rel * scale + abs_floor)
            ++out.failures;
        if (scale > abs_floor)
            out.worst_rel = std::max(out.worst_rel, std::abs(fd - an) / scale);
    }
    return out;
}

inline Example random_example(Rng& rng, std::size_t n_min, std::size_t n_max)
{
    Example ex;
    ex.neighbors = random_neighbors(rng, n_min + uniform_index(rng, n_max - n_min + 1));
    ex.source_id = static_cast<std::uint16_t>(uniform_index(rng, kDictionarySize));
    ex.target_id = static_cast<std::uint16_t>(uniform_index(rng, kDictionarySize));
    ex.gt_interp = static_cast<float>(uniform01(rng));
    ex.gt_harm = static_cast<float>(uniform01(rng));
    return ex;
}

} // namespace oracle
