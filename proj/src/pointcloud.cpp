#include "lidarharm/pointcloud.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lidarharm/error.hpp"

namespace lidarharm {

void validate_scan(const Scan& scan)
{
    if (scan.scan_id >= kDictionarySize)
        throw DomainError("scan id " + std::to_string(scan.scan_id) + " outside embedding dictionary of size " +
                          std::to_string(kDictionarySize));
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        const Point& p = scan.points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw DomainError("point " + std::to_string(i) + " has a non-finite coordinate");
        if (!(p.intensity >= 0.0f && p.intensity <= 1.0f))
            throw DomainError("point " + std::to_string(i) + " intensity outside [0,1]");
    }
}

Box2 bounding_box(std::span<const Point> points)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    Box2 box{inf, inf, -inf, -inf};
    for (const Point& p : points) {
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
    }
    return box;
}

} // namespace lidarharm
