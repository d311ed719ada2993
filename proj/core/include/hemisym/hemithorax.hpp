#pragma once

#include "hemisym/snake.hpp"

namespace hemisym {

/// Fitted straight symmetry axis. direction is unit-norm with positive y
/// component and lies within 45 degrees of vertical.
struct SpineLine {
    Vec2 point;              // a point on the line
    Vec2 direction;          // unit tangent, direction.y > 0
    double y_min = 0.0;      // fitted row extent
    double y_max = 0.0;

    static SpineLine make(Vec2 point, Vec2 direction, double y_min, double y_max);

    /// x coordinate of the line at the given y.
    double x_at(double y) const { return point.x + direction.x * (y - point.y) / direction.y; }

    /// Signed side of a point: negative left, positive right, zero on the line.
    double side_of(Vec2 p) const { return (p - point).cross(direction); }

    /// Reflect a point across the line.
    Vec2 reflect(Vec2 p) const {
        const Vec2 v = p - point;
        return point + 2.0 * v.dot(direction) * direction - v;
    }
};

struct HemithoraxPair {
    BinaryMask left;
    BinaryMask right;
    SpineLine spine;
};

/// Fit the spine midline: per-row x-centroids of the mask, total least
/// squares through the (centroid, row) points. Requires at least 20
/// occupied rows.
SpineLine fit_spine_midline(const BinaryMask& spine_mask);

/// Partition a region's pixels by the side of the spine line. Pixels exactly
/// on the line belong to neither half. Left is the smaller-x side for a
/// vertical spine.
HemithoraxPair split_by_spine(const BinaryMask& region, const SpineLine& spine);

enum class SnakeMode { OneSnake, TwoSnake };

SnakeMode snake_mode_from_string(const std::string& s);
std::string to_string(SnakeMode mode);

/// Recover the left/right hemithoraces from rib and spine masks.
///
/// one-snake: fit a single contour to the whole rib mask, rasterize, split
/// by the fitted spine line. two-snake: split the rib mask first and fit an
/// independent contour per side. Both modes clip the results so left/right
/// are disjoint and lie strictly on their own side of the line.
HemithoraxPair segment_hemithoraces(const BinaryMask& ribs, const BinaryMask& spine_mask,
                                    const SnakeParams& params, SnakeMode mode,
                                    double init_margin = 10.0);

/// Reflect a mask across a line, rounding to pixel centers.
BinaryMask reflect_mask(const BinaryMask& mask, const SpineLine& line);

} // namespace hemisym
