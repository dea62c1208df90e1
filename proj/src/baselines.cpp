#include "lidarharm/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "lidarharm/error.hpp"

namespace lidarharm {

InterpMethod parse_interp_method(std::string_view name)
{
    if (name == "nearest")
        return InterpMethod::nearest;
    if (name == "linear")
        return InterpMethod::linear;
    if (name == "cubic")
        return InterpMethod::cubic;
    throw DomainError("unknown interpolation method '" + std::string(name) + "'");
}

std::string to_string(InterpMethod method)
{
    switch (method) {
    case InterpMethod::nearest:
        return "nearest";
    case InterpMethod::linear:
        return "linear";
    case InterpMethod::cubic:
        return "cubic";
    }
    return "?";
}

namespace {

double distance(const Vec3& a, const Vec3& b)
{
    return std::sqrt(squared_distance(a, b));
}

double idw(std::span<const Vec3> positions, std::span<const double> values, const Vec3& loc)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double d = std::max(distance(positions[i], loc), kDistanceFloor);
        const double w = 1.0 / (d * d);
        num += w * values[i];
        den += w;
    }
    return num / den;
}

double cube(double r)
{
    return r * r * r;
}

} // namespace

InterpResult interpolate(InterpMethod method, std::span<const Vec3> positions, std::span<const double> values,
                         const Vec3& loc)
{
    if (positions.empty() || positions.size() != values.size())
        throw DomainError("interpolation needs at least one neighbor with a value");
    std::size_t nearest = 0;
    double best = distance(positions[0], loc);
    for (std::size_t i = 1; i < positions.size(); ++i) {
        const double d = distance(positions[i], loc);
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    if (best < kDistanceFloor || method == InterpMethod::nearest || positions.size() == 1)
        return {values[nearest], false};
    if (method == InterpMethod::linear)
        return {idw(positions, values, loc), false};

    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = cube(distance(positions[i], positions[j]));
        a(i, n) = 1.0;
        a(n, i) = 1.0;
        rhs(i) = values[i];
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        return {idw(positions, values, loc), true};
    const Eigen::VectorXd c = lu.solve(rhs);
    double v = c(n);
    for (Eigen::Index j = 0; j < n; ++j)
        v += c(j) * cube(distance(loc, positions[j]));
    if (!std::isfinite(v))
        return {idw(positions, values, loc), true};
    return {std::clamp(v, 0.0, 1.0), false};
}

InterpResult interpolate(InterpMethod method, std::span<const NeighborFeature> neighbors)
{
    std::vector<Vec3> positions;
    std::vector<double> values;
    positions.reserve(neighbors.size());
    values.reserve(neighbors.size());
    for (const auto& n : neighbors) {
        positions.push_back({n.dx, n.dy, n.dz});
        values.push_back(n.intensity);
    }
    return interpolate(method, positions, values, Vec3{0.0, 0.0, 0.0});
}

AffineHead fit_affine(std::span<const double> interp, std::span<const double> harm)
{
    if (interp.size() != harm.size())
        throw DomainError("fit_affine: length mismatch");
    if (interp.size() < 2)
        throw DomainError("fit_affine: degenerate input (fewer than two pairs)");
    const double n = static_cast<double>(interp.size());
    double mi = 0.0, mh = 0.0;
    for (std::size_t k = 0; k < interp.size(); ++k) {
        mi += interp[k];
        mh += harm[k];
    }
    mi /= n;
    mh /= n;
    double sii = 0.0, sih = 0.0;
    for (std::size_t k = 0; k < interp.size(); ++k) {
        const double di = interp[k] - mi;
        sii += di * di;
        sih += di * (harm[k] - mh);
    }
    if (!(sii > 0.0))
        throw DomainError("fit_affine: degenerate input (constant I)");
    AffineHead head;
    head.a = sih / sii;
    head.b = mh - head.a * mi;
    return head;
}

MlpHead fit_mlp_head(std::span<const HeadPair> pairs, const TrainConfig& config, const ModelShape& shape, int threads)
{
    if (pairs.size() < 100)
        throw DomainError("fit_mlp_head needs at least 100 pairs, got " + std::to_string(pairs.size()));
    std::vector<HeadPair> train_pairs, val_pairs;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (i % 10 == 9 ? val_pairs : train_pairs).push_back(pairs[i]);

    ParamSet params(head_layout(shape));
    initialize_params(params, config.seed);
    const HeadBlocks blocks = HeadBlocks::find(params);

    auto objective = [&](const std::vector<HeadPair>& set) {
        return [&set, &blocks, &config](const ParamSet& p, std::size_t i, const DropoutControl& d, ParamSet* g) {
            const HeadPair& pair = set[i];
            HeadTrace trace;
            const double h = head_forward(p, blocks, pair.interp, pair.source_id, pair.target_id, d, trace);
            LossTerms terms;
            terms.harmonized = rho(h, pair.harm, config.loss);
            terms.total = terms.harmonized;
            if (g != nullptr)
                head_backward(p, blocks, trace, rho_grad(h, pair.harm, config.loss), *g);
            return terms;
        };
    };
    TrainResult result = train_loop(std::move(params), train_pairs.size(), val_pairs.size(), objective(train_pairs),
                                    objective(val_pairs), config, threads);
    if (result.diverged)
        throw Error("MLP head training diverged: " + result.divergence_reason);
    return {std::move(result.params), std::move(result.history)};
}

double apply_mlp_head(const ParamSet& head, double interp, std::uint16_t source_id, std::uint16_t target_id)
{
    HeadTrace trace;
    return head_forward(head, HeadBlocks::find(head), interp, source_id, target_id, DropoutControl{}, trace);
}

namespace {

std::vector<double> histogram(std::span<const float> sample, std::size_t n_bins)
{
    std::vector<double> h(n_bins, 0.0);
    for (float v : sample)
        h[intensity_bin(v, n_bins)] += 1.0;
    return h;
}

} // namespace

HistMatchLUT build_histmatch(std::span<const float> source, std::span<const float> target, std::size_t n_bins)
{
    if (source.empty() || target.empty())
        throw DomainError("histogram matching needs non-empty samples");
    if (n_bins < 2)
        throw DomainError("histogram matching needs at least 2 bins");
    std::vector<float> sorted_t(target.begin(), target.end());
    std::sort(sorted_t.begin(), sorted_t.end());
    const std::vector<double> counts = histogram(source, n_bins);
    const double n_s = static_cast<double>(source.size());
    const double n_t = static_cast<double>(sorted_t.size());

    HistMatchLUT lut;
    lut.centers.resize(n_bins);
    lut.values.assign(n_bins, 0.0);
    std::vector<bool> known(n_bins, false);
    double before = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        lut.centers[b] = (static_cast<double>(b) + 0.5) / static_cast<double>(n_bins);
        if (counts[b] > 0.0) {
            // mid-rank of the bin in the source, rescaled to the target sample
            const double rank = (before + 0.5 * counts[b]) * n_t / n_s;
            const auto k = static_cast<std::size_t>(std::clamp(std::ceil(rank), 1.0, n_t)) - 1;
            lut.values[b] = sorted_t[k];
            known[b] = true;
        }
        before += counts[b];
    }
    // empty source bins interpolate between their known neighbors
    std::size_t first = 0;
    while (!known[first])
        ++first;
    std::size_t last = n_bins - 1;
    while (!known[last])
        --last;
    for (std::size_t b = 0; b < first; ++b)
        lut.values[b] = lut.values[first];
    for (std::size_t b = last + 1; b < n_bins; ++b)
        lut.values[b] = lut.values[last];
    std::size_t prev = first;
    for (std::size_t b = first + 1; b <= last; ++b) {
        if (!known[b])
            continue;
        for (std::size_t m = prev + 1; m < b; ++m) {
            const double t = static_cast<double>(m - prev) / static_cast<double>(b - prev);
            lut.values[m] = lut.values[prev] + t * (lut.values[b] - lut.values[prev]);
        }
        prev = b;
    }
    return lut;
}

double apply_lut(const HistMatchLUT& lut, double i)
{
    const std::size_t n = lut.centers.size();
    if (n == 0)
        throw DomainError("empty look-up table");
    if (i <= lut.centers.front())
        return lut.values.front();
    if (i >= lut.centers.back())
        return lut.values.back();
    const double pos = i * static_cast<double>(n) - 0.5;
    const auto b = std::min(static_cast<std::size_t>(pos), n - 2);
    const double t = pos - static_cast<double>(b);
    return lut.values[b] + t * (lut.values[b + 1] - lut.values[b]);
}

double histogram_distance(std::span<const float> a, std::span<const float> b, std::size_t n_bins)
{
    if (a.empty() || b.empty())
        throw DomainError("histogram distance needs non-empty samples");
    const auto ha = histogram(a, n_bins);
    const auto hb = histogram(b, n_bins);
    double d = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k)
        d += std::abs(ha[k] / static_cast<double>(a.size()) - hb[k] / static_cast<double>(b.size()));
    return d;
}

} // namespace lidarharm
