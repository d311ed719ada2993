#include <algorithm>
#include <cmath>

#include "hemisym/hemithorax.hpp"

namespace hemisym {

SpineLine SpineLine::make(Vec2 point, Vec2 direction, double y_min, double y_max) {
    const double n = direction.norm();
    if (n < 1e-12) throw NumericError("spine line: zero direction");
    Vec2 d{direction.x / n, direction.y / n};
    if (d.y < 0.0) d = {-d.x, -d.y};
    if (d.y < std::sqrt(0.5))
        throw NumericError("spine line: direction more than 45 degrees from vertical");
    return SpineLine{point, d, y_min, y_max};
}

SpineLine fit_spine_midline(const BinaryMask& spine_mask) {
    std::vector<Vec2> points; // (row x-centroid, row)
    for (int y = 0; y < spine_mask.height; ++y) {
        double sx = 0.0;
        int n = 0;
        for (int x = 0; x < spine_mask.width; ++x)
            if (spine_mask.at(x, y)) {
                sx += x;
                ++n;
            }
        if (n > 0) points.push_back({sx / n, static_cast<double>(y)});
    }
    if (points.size() < 20)
        throw InputError("spine mask is empty or spans fewer than 20 rows");

    Vec2 mean{0, 0};
    for (const Vec2& p : points) mean += p;
    mean = mean * (1.0 / points.size());

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const Vec2& p : points) {
        const double dx = p.x - mean.x, dy = p.y - mean.y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // Principal direction of the scatter (total least squares).
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    Vec2 dir{std::cos(angle), std::sin(angle)};
    // atan2 yields the major axis only up to the eigenvalue ordering; pick
    // the direction that maximizes the projected variance.
    const double along = dir.x * dir.x * sxx + 2.0 * dir.x * dir.y * sxy + dir.y * dir.y * syy;
    const Vec2 perp{-dir.y, dir.x};
    const double across = perp.x * perp.x * sxx + 2.0 * perp.x * perp.y * sxy +
                          perp.y * perp.y * syy;
    if (across > along) dir = perp;

    return SpineLine::make(mean, dir, points.front().y, points.back().y);
}

HemithoraxPair split_by_spine(const BinaryMask& region, const SpineLine& spine) {
    BinaryMask left(region.width, region.height);
    BinaryMask right(region.width, region.height);
    for (int y = 0; y < region.height; ++y)
        for (int x = 0; x < region.width; ++x) {
            if (!region.at(x, y)) continue;
            const double s = spine.side_of({static_cast<double>(x), static_cast<double>(y)});
            if (s < 0.0) left.set(x, y, true);
            else if (s > 0.0) right.set(x, y, true);
        }
    return {std::move(left), std::move(right), spine};
}

SnakeMode snake_mode_from_string(const std::string& s) {
    if (s == "one-snake") return SnakeMode::OneSnake;
    if (s == "two-snake") return SnakeMode::TwoSnake;
    throw InputError("unknown snake mode '" + s + "' (expected one-snake or two-snake)");
}

std::string to_string(SnakeMode mode) {
    return mode == SnakeMode::OneSnake ? "one-snake" : "two-snake";
}

namespace {

BinaryMask fit_thorax(const BinaryMask& ribs, const SnakeParams& params, double margin) {
    const EnergyField field = external_energy_field(ribs, params);
    const Contour init = init_rectangle(ribs, margin, params.n_vertices);
    const SnakeResult res = evolve(init, field, params);
    return contour_to_mask(res.contour, ribs.width, ribs.height);
}

} // namespace

HemithoraxPair segment_hemithoraces(const BinaryMask& ribs, const BinaryMask& spine_mask,
                                    const SnakeParams& params, SnakeMode mode,
                                    double init_margin) {
    if (ribs.empty()) throw InputError("segment_hemithoraces: empty rib mask");
    const SpineLine spine = fit_spine_midline(spine_mask);

    if (mode == SnakeMode::OneSnake) {
        const BinaryMask thorax = fit_thorax(ribs, params, init_margin);
        return split_by_spine(thorax, spine);
    }

    const HemithoraxPair rib_sides = split_by_spine(ribs, spine);
    if (rib_sides.left.empty() || rib_sides.right.empty())
        throw NumericError("two-snake mode: one side of the rib mask is empty");

    const BinaryMask left_fit = fit_thorax(rib_sides.left, params, init_margin);
    const BinaryMask right_fit = fit_thorax(rib_sides.right, params, init_margin);

    // Clip each fit to its own side so the pair invariants hold exactly.
    HemithoraxPair out;
    out.left = split_by_spine(left_fit, spine).left;
    out.right = split_by_spine(right_fit, spine).right;
    out.spine = spine;
    return out;
}

BinaryMask reflect_mask(const BinaryMask& mask, const SpineLine& line) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const Vec2 r = line.reflect({static_cast<double>(x), static_cast<double>(y)});
            const int rx = static_cast<int>(std::lround(r.x));
            const int ry = static_cast<int>(std::lround(r.y));
            if (out.in_bounds(rx, ry)) out.set(rx, ry, true);
        }
    return out;
}

} // namespace hemisym
