#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hemisym/errors.hpp"
#include "hemisym/geometry.hpp"

namespace hemisym {

/// Grayscale image with intensities normalized to [0,1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels; // row-major, width*height entries

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    size_t size() const { return pixels.size(); }
};

/// Binary pixel region on a fixed frame.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits; // 0/1, row-major

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    std::size_t count() const;
    bool empty() const { return count() == 0; }
    /// Tight bounding box of member pixels; nullopt for an empty mask.
    std::optional<Box> bbox() const;
    /// Centroid of member pixel centers; throws NumericError on an empty mask.
    Vec2 centroid() const;

    bool operator==(const BinaryMask&) const = default;
};

/// Ellipse in pixel coordinates. rotation is the angle of the semi-major
/// axis from the +x axis, in radians.
struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double semi_major = 1.0;
    double semi_minor = 1.0;
    double rotation = 0.0;

    double area() const { return 3.14159265358979323846 * semi_major * semi_minor; }
    bool contains(double x, double y) const;
};

// --- PNG I/O -------------------------------------------------------------

/// Load a PNG as a grayscale image. Color inputs are converted to BT.709
/// luminance; intensities are normalized by the bit-depth maximum.
GrayImage load_gray(const std::filesystem::path& path);

/// Write an image as 8-bit grayscale PNG (values rounded to 0..255).
void save_gray(const GrayImage& img, const std::filesystem::path& path);

/// Load a mask: membership(p) = intensity(p) >= threshold, threshold in (0,1).
BinaryMask load_mask(const std::filesystem::path& path, double threshold = 0.5);

/// Write a mask as 8-bit grayscale PNG with values {0,255}.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Threshold an in-memory image into a mask.
BinaryMask mask_from_image(const GrayImage& img, double threshold = 0.5);

// --- Intensity transforms ------------------------------------------------

/// Power-law remap on normalized intensities: out = in^gamma.
/// gamma < 1 brightens, gamma > 1 darkens.
GrayImage gamma_transform(const GrayImage& img, double gamma);

/// Add zero-mean Gaussian noise. sigma is expressed on the 8-bit scale and
/// rescaled by 1/255 internally; the result is clamped to [0,1].
/// Identical (img, sigma, seed) triples produce bit-identical outputs.
GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed);

/// Separable Gaussian blur. radius is the kernel half-width in pixels, with
/// the kernel standard deviation radius/3 (radius <= 0 returns a copy).
GrayImage gaussian_blur(const GrayImage& img, double radius);

// --- Masks and occlusion -------------------------------------------------

/// Moment-matching ellipse fit: center at the mask centroid, axes and
/// rotation from the second central moments of member pixels.
Ellipse fit_ellipse(const BinaryMask& mask);

/// Paint a bright (intensity 1.0) occluder over the image: the given ellipse
/// shrunk by dividing its axes by divisors drawn uniformly from [2,4].
GrayImage obstruct(const GrayImage& img, const Ellipse& thorax_ellipse, std::uint64_t seed);

/// Occlusion with fixed axis divisors (the seeded overload draws them).
GrayImage obstruct_with_divisors(const GrayImage& img, const Ellipse& thorax_ellipse,
                                 double major_divisor, double minor_divisor);

/// Intersection over union of two same-sized masks.
/// Both masks empty is defined as 1.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Mirror a mask about the vertical center line of its frame (x -> w-1-x).
BinaryMask mirror_horizontal(const BinaryMask& mask);

/// Rasterize a filled ellipse into a mask (pixel-center test).
BinaryMask rasterize_ellipse(const Ellipse& e, int width, int height);

} // namespace hemisym
