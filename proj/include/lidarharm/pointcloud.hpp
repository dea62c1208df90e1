#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lidarharm {

/// Size of the sensor embedding dictionary; scan ids must stay below it.
inline constexpr std::size_t kDictionarySize = 45;

using Vec3 = std::array<double, 3>;

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    float intensity = 0.0f; ///< normalized reflectance in [0, 1]

    Vec3 position() const { return {x, y, z}; }
    friend bool operator==(const Point&, const Point&) = default;
};

/// One flight strip / sensor pass.
struct Scan {
    std::uint16_t scan_id = 0;
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    friend bool operator==(const Scan&, const Scan&) = default;
};

/// Axis-aligned box in the xy plane.
struct Box2 {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

    bool contains(double x, double y) const { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }
    bool intersects(const Box2& o) const
    {
        return !(o.min_x > max_x || o.max_x < min_x || o.min_y > max_y || o.max_y < min_y);
    }
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    friend bool operator==(const Box2&, const Box2&) = default;
};

/// Throws DomainError if a point has a non-finite coordinate or an intensity
/// outside [0, 1], or the scan id is outside the dictionary.
void validate_scan(const Scan& scan);

Box2 bounding_box(std::span<const Point> points);

inline double squared_distance(const Vec3& a, const Vec3& b)
{
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

} // namespace lidarharm
