#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hemisym/raster.hpp"

namespace hemisym {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::optional<Box> BinaryMask::bbox() const {
    Box b{width, height, -1, -1};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (at(x, y)) {
                b.x0 = std::min(b.x0, x);
                b.y0 = std::min(b.y0, y);
                b.x1 = std::max(b.x1, x);
                b.y1 = std::max(b.y1, y);
            }
    if (!b.valid()) return std::nullopt;
    return b;
}

Vec2 BinaryMask::centroid() const {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (at(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
    if (n == 0) throw NumericError("centroid of empty mask");
    return {sx / n, sy / n};
}

bool Ellipse::contains(double x, double y) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double dx = x - cx, dy = y - cy;
    const double u = (c * dx + s * dy) / semi_major;
    const double v = (-s * dx + c * dy) / semi_minor;
    return u * u + v * v <= 1.0;
}

BinaryMask mask_from_image(const GrayImage& img, double threshold) {
    BinaryMask m(img.width, img.height);
    for (size_t i = 0; i < img.size(); ++i) m.bits[i] = img.pixels[i] >= threshold ? 1 : 0;
    return m;
}

GrayImage gamma_transform(const GrayImage& img, double gamma) {
    if (!(gamma > 0.0)) throw InputError("gamma must be positive");
    GrayImage out(img.width, img.height);
    for (size_t i = 0; i < img.size(); ++i) out.pixels[i] = std::pow(img.pixels[i], gamma);
    return out;
}

GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw InputError("noise sigma must be non-negative");
    if (sigma == 0.0) return img;
    GrayImage out(img.width, img.height);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma / 255.0);
    for (size_t i = 0; i < img.size(); ++i)
        out.pixels[i] = std::clamp(img.pixels[i] + noise(rng), 0.0, 1.0);
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, double radius) {
    if (radius <= 0.0) return img;
    const int r = std::max(1, static_cast<int>(std::lround(radius)));
    const double sigma = radius / 3.0;
    std::vector<double> kernel(2 * r + 1);
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) {
        kernel[k + r] = std::exp(-0.5 * (k * k) / (sigma * sigma));
        sum += kernel[k + r];
    }
    for (double& w : kernel) w /= sum;

    const int w = img.width, h = img.height;
    GrayImage tmp(w, h), out(w, h);
    // Horizontal pass, clamp-to-edge.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k)
                acc += kernel[k + r] * img.at(std::clamp(x + k, 0, w - 1), y);
            tmp.at(x, y) = acc;
        }
    // Vertical pass.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k)
                acc += kernel[k + r] * tmp.at(x, std::clamp(y + k, 0, h - 1));
            out.at(x, y) = acc;
        }
    return out;
}

Ellipse fit_ellipse(const BinaryMask& mask) {
    if (mask.empty()) throw NumericError("ellipse fit: empty mask");
    const Vec2 c = mask.centroid();
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                const double dx = x - c.x, dy = y - c.y;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
                ++n;
            }
    sxx /= n;
    syy /= n;
    sxy /= n;

    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double l1 = tr / 2.0 + disc;
    const double l2 = tr / 2.0 - disc;
    if (l2 <= 1e-9) throw NumericError("ellipse fit: degenerate (collinear) mask");

    // For a uniform ellipse, the variance along an axis is (semi_axis^2)/4.
    Ellipse e;
    e.cx = c.x;
    e.cy = c.y;
    e.semi_major = 2.0 * std::sqrt(l1);
    e.semi_minor = 2.0 * std::sqrt(l2);
    double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    if (angle < 0.0) angle += 3.14159265358979323846;
    e.rotation = angle;
    return e;
}

GrayImage obstruct_with_divisors(const GrayImage& img, const Ellipse& thorax_ellipse,
                                 double major_divisor, double minor_divisor) {
    Ellipse occ = thorax_ellipse;
    occ.semi_major /= major_divisor;
    occ.semi_minor /= minor_divisor;

    GrayImage out = img;
    std::size_t painted = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (occ.contains(x, y)) {
                out.at(x, y) = 1.0;
                ++painted;
            }
    if (painted == 0)
        throw InputError("obstruction ellipse does not overlap the image frame");
    return out;
}

GrayImage obstruct(const GrayImage& img, const Ellipse& thorax_ellipse, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> div(2.0, 4.0);
    const double major_div = div(rng);
    const double minor_div = div(rng);
    return obstruct_with_divisors(img, thorax_ellipse, major_div, minor_div);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw InputError("mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0; // both empty: identical regions
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask mirror_horizontal(const BinaryMask& mask) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            out.set(mask.width - 1 - x, y, mask.at(x, y));
    return out;
}

BinaryMask rasterize_ellipse(const Ellipse& e, int width, int height) {
    BinaryMask m(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (e.contains(x, y)) m.set(x, y, true);
    return m;
}

} // namespace hemisym
