#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lidarharm/pointcloud.hpp"

namespace lidarharm {

struct Neighbor {
    std::uint32_t index = 0; ///< position of the point in the indexed scan
    Point point;
    double distance = 0.0;
};

/// Immutable k-d tree over a scan's points.
///
/// Queries return exactly the k nearest points by Euclidean distance; ties
/// are broken by lower point index. Safe for concurrent queries.
class SpatialIndex {
public:
    explicit SpatialIndex(const Scan& scan);

    /// Up to `k` points within `radius` of `loc`, ascending by distance.
    std::vector<Neighbor> query_knn(const Vec3& loc, std::size_t k, double radius) const;

    /// True if any point lies within `radius` of `loc`.
    bool any_within(const Vec3& loc, double radius) const;

    std::size_t size() const { return points_.size(); }
    std::uint16_t scan_id() const { return scan_id_; }
    const std::vector<Point>& points() const { return points_; }

private:
    struct Node {
        double lo[3];
        double hi[3];
        std::uint32_t begin = 0; // into order_
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Point> points_;
    std::vector<Vec3> coords_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint16_t scan_id_ = 0;
};

/// Throws Error("empty scan") for an empty scan.
SpatialIndex build_index(const Scan& scan);

/// Number of points of `a` with at least one point of the indexed scan
/// within `radius`.
std::size_t overlap_count(const Scan& a, const SpatialIndex& b, double radius, int threads = 1);

/// Per-point membership flags for the same predicate as overlap_count.
std::vector<bool> overlap_mask(const Scan& a, const SpatialIndex& b, double radius, int threads = 1);

} // namespace lidarharm
