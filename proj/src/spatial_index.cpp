#include "lidarharm/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "lidarharm/error.hpp"
#include "lidarharm/parallel.hpp"

namespace lidarharm {

namespace {

constexpr std::uint32_t kLeafSize = 8;

double box_distance2(const double lo[3], const double hi[3], const Vec3& p)
{
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        if (p[a] < lo[a])
            d = lo[a] - p[a];
        else if (p[a] > hi[a])
            d = p[a] - hi[a];
        d2 += d * d;
    }
    return d2;
}

struct Candidate {
    double d2;
    std::uint32_t index;
    // Max-heap by (distance, index): the top is the worst kept candidate.
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

} // namespace

SpatialIndex::SpatialIndex(const Scan& scan) : points_(scan.points), scan_id_(scan.scan_id)
{
    if (scan.points.empty())
        throw Error("empty scan");
    if (scan.points.size() > std::numeric_limits<std::uint32_t>::max())
        throw Error("scan too large for index");
    coords_.reserve(points_.size());
    for (const Point& p : points_)
        coords_.push_back(p.position());
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end)
{
    Node node;
    for (int a = 0; a < 3; ++a) {
        node.lo[a] = std::numeric_limits<double>::infinity();
        node.hi[a] = -std::numeric_limits<double>::infinity();
    }
    for (std::uint32_t i = begin; i < end; ++i) {
        const Vec3& c = coords_[order_[i]];
        for (int a = 0; a < 3; ++a) {
            node.lo[a] = std::min(node.lo[a], c[a]);
            node.hi[a] = std::max(node.hi[a], c[a]);
        }
    }
    node.begin = begin;
    node.end = end;
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize)
        return id;

    int axis = 0;
    double widest = -1.0;
    for (int a = 0; a < 3; ++a) {
        if (node.hi[a] - node.lo[a] > widest) {
            widest = node.hi[a] - node.lo[a];
            axis = a;
        }
    }
    if (widest <= 0.0)
        return id; // all coincident: keep as one leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t l, std::uint32_t r) {
                         const double cl = coords_[l][axis];
                         const double cr = coords_[r][axis];
                         return cl < cr || (cl == cr && l < r);
                     });
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> SpatialIndex::query_knn(const Vec3& loc, std::size_t k, double radius) const
{
    std::vector<Neighbor> out;
    if (k == 0 || !(radius > 0.0))
        return out;
    const double r2 = radius * radius;
    std::priority_queue<Candidate> best;

    auto bound = [&] { return best.size() < k ? r2 : best.top().d2; };

    // Explicit stack; the nearer child is visited first.
    std::int32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
        // Strict comparison: a node at exactly the bound may still hold a
        // tie with a lower index.
        if (box_distance2(node.lo, node.hi, loc) > bound())
            continue;
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t idx = order_[i];
                const double d2 = squared_distance(coords_[idx], loc);
                if (d2 > r2)
                    continue;
                Candidate c{d2, idx};
                if (best.size() < k) {
                    best.push(c);
                } else if (c < best.top()) {
                    best.pop();
                    best.push(c);
                }
            }
            continue;
        }
        const Node& l = nodes_[static_cast<std::size_t>(node.left)];
        const Node& r = nodes_[static_cast<std::size_t>(node.right)];
        const double dl = box_distance2(l.lo, l.hi, loc);
        const double dr = box_distance2(r.lo, r.hi, loc);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }

    out.resize(best.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        const Candidate c = best.top();
        best.pop();
        out[i] = Neighbor{c.index, points_[c.index], std::sqrt(c.d2)};
    }
    return out;
}

bool SpatialIndex::any_within(const Vec3& loc, double radius) const
{
    return !query_knn(loc, 1, radius).empty();
}

SpatialIndex build_index(const Scan& scan)
{
    return SpatialIndex(scan);
}

std::vector<bool> overlap_mask(const Scan& a, const SpatialIndex& b, double radius, int threads)
{
    if (!(radius > 0.0))
        throw DomainError("overlap radius must be positive");
    std::vector<char> flags(a.points.size(), 0);
    parallel_for(a.points.size(), threads,
                 [&](std::size_t i) { flags[i] = b.any_within(a.points[i].position(), radius) ? 1 : 0; });
    return std::vector<bool>(flags.begin(), flags.end());
}

std::size_t overlap_count(const Scan& a, const SpatialIndex& b, double radius, int threads)
{
    const auto mask = overlap_mask(a, b, radius, threads);
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

} // namespace lidarharm
