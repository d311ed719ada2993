#include <algorithm>
#include <cmath>
#include <random>

#include "hemisym/phantom.hpp"

namespace hemisym {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBoneIntensity = 0.85;
constexpr double kLungIntensity = 0.2;
constexpr double kBackgroundIntensity = 0.55;
constexpr double kInnermostRing = 0.4; // elliptic radius of the innermost rib band

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

Ellipse PhantomSpec::thorax_ellipse() const {
    Ellipse e;
    e.cx = width / 2.0;
    e.cy = height / 2.0;
    if (thorax_semi_y >= thorax_semi_x) {
        e.semi_major = thorax_semi_y;
        e.semi_minor = thorax_semi_x;
        e.rotation = kPi / 2.0;
    } else {
        e.semi_major = thorax_semi_x;
        e.semi_minor = thorax_semi_y;
        e.rotation = 0.0;
    }
    return e;
}

void PhantomSpec::validate() const {
    if (width < 64 || height < 64) throw InputError("phantom frame too small");
    if (n_rib_pairs < 1) throw InputError("phantom needs at least one rib pair");
    if (rib_thickness <= 0.0) throw InputError("rib thickness must be positive");
    if (thorax_semi_x <= 0.0 || thorax_semi_y <= 0.0)
        throw InputError("thorax semi-axes must be positive");
    if (thorax_semi_x >= width / 2.0 - 4 || thorax_semi_y >= height / 2.0 - 4)
        throw InputError("thorax ellipse does not fit the frame");
    if (spine_width <= 0.0) throw InputError("spine width must be positive");
    if (std::abs(spine_tilt_deg) > 40.0) throw InputError("spine tilt too large");
    switch (asymmetry.kind) {
        case AsymmetryKind::None:
            break;
        case AsymmetryKind::Scale:
            if (asymmetry.amount <= 0.0 || asymmetry.amount > 1.0)
                throw InputError("scale asymmetry factor must lie in (0,1]");
            break;
        case AsymmetryKind::Shear:
            if (std::abs(asymmetry.amount) >= kPi / 4.0)
                throw InputError("shear angle too large");
            break;
        case AsymmetryKind::Truncate:
            if (asymmetry.amount < 0.0 || asymmetry.amount >= 0.9)
                throw InputError("truncate fraction must lie in [0,0.9)");
            break;
    }
}

namespace {

struct PhantomGeometry {
    const PhantomSpec& spec;
    double cx, cy;
    double tilt_tan;   // spine slope: x = cx + tilt_tan * (y - cy)
    double ring_delta; // band thickness in elliptic-radius units

    explicit PhantomGeometry(const PhantomSpec& s)
        : spec(s),
          cx(s.width / 2.0),
          cy(s.height / 2.0),
          tilt_tan(std::tan(s.spine_tilt_deg * kPi / 180.0)),
          ring_delta(s.rib_thickness / std::min(s.thorax_semi_x, s.thorax_semi_y)) {}

    double spine_x(double y) const { return cx + tilt_tan * (y - cy); }

    bool on_affected_side(double x, double y) const {
        const double side = x - spine_x(y);
        return spec.asymmetry.side == Side::Left ? side < 0.0 : side > 0.0;
    }

    // Map a pixel back to the undeformed template; returns false when the
    // pixel is removed outright (truncation).
    bool undeform(double x, double y, double& x0, double& y0) const {
        x0 = x;
        y0 = y;
        if (spec.asymmetry.kind == AsymmetryKind::None || !on_affected_side(x, y)) return true;
        const double sx = spine_x(y);
        switch (spec.asymmetry.kind) {
            case AsymmetryKind::Scale:
                x0 = sx + (x - sx) / spec.asymmetry.amount;
                break;
            case AsymmetryKind::Shear:
                y0 = y - std::tan(spec.asymmetry.amount) * std::abs(x - sx);
                break;
            case AsymmetryKind::Truncate: {
                const double keep_below = cy + spec.thorax_semi_y *
                                                   (1.0 - 2.0 * spec.asymmetry.amount);
                if (y > keep_below) return false;
                break;
            }
            default:
                break;
        }
        return true;
    }

    double elliptic_radius(double x0, double y0) const {
        const double u = (x0 - cx) / spec.thorax_semi_x;
        const double v = (y0 - cy) / spec.thorax_semi_y;
        return std::sqrt(u * u + v * v);
    }

    bool in_thorax(double x, double y) const {
        double x0, y0;
        if (!undeform(x, y, x0, y0)) return false;
        return elliptic_radius(x0, y0) <= 1.0;
    }

    bool in_ribs(double x, double y) const {
        double x0, y0;
        if (!undeform(x, y, x0, y0)) return false;
        const double r = elliptic_radius(x0, y0);
        if (r > 1.0) return false;
        const int p = spec.n_rib_pairs;
        for (int k = 0; k < p; ++k) {
            const double outer = p == 1 ? 1.0
                                        : kInnermostRing +
                                              (1.0 - kInnermostRing) * k / (p - 1.0);
            if (r <= outer && r >= outer - ring_delta) return true;
        }
        return false;
    }

    bool in_spine(double x, double y) const {
        const double margin = 20.0;
        if (y < cy - spec.thorax_semi_y - margin || y > cy + spec.thorax_semi_y + margin)
            return false;
        return std::abs(x - spine_x(y)) <= spec.spine_width / 2.0;
    }
};

} // namespace

Phantom generate(const PhantomSpec& spec) {
    spec.validate();
    const PhantomGeometry geo(spec);
    const int w = spec.width, h = spec.height;

    Phantom ph;
    ph.ribs = BinaryMask(w, h);
    ph.spine = BinaryMask(w, h);
    ph.radiograph = GrayImage(w, h, kBackgroundIntensity);
    BinaryMask thorax(w, h);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool in_thorax = geo.in_thorax(x, y);
            const bool in_ribs = in_thorax && geo.in_ribs(x, y);
            const bool in_spine = geo.in_spine(x, y);
            if (in_thorax) {
                thorax.set(x, y, true);
                ph.radiograph.at(x, y) = kLungIntensity;
            }
            if (in_ribs) {
                ph.ribs.set(x, y, true);
                ph.radiograph.at(x, y) = kBoneIntensity;
            }
            if (in_spine) {
                ph.spine.set(x, y, true);
                ph.radiograph.at(x, y) = kBoneIntensity;
            }
        }

    // Faint speckle so the rendering is not piecewise constant.
    ph.radiograph = add_gaussian_noise(ph.radiograph, 2.0, spec.noise_seed);

    ph.truth = split_by_spine(thorax, fit_spine_midline(ph.spine));
    ph.label = spec.asymmetry.kind == AsymmetryKind::None ? 0 : 1;
    return ph;
}

std::vector<ManifestRow> generate_corpus(int n, double asym_fraction, std::uint64_t seed,
                                         const std::filesystem::path& out_dir,
                                         const CorpusRanges& ranges) {
    if (n < 10) throw InputError("generate_corpus: n must be at least 10");
    if (asym_fraction < 0.0 || asym_fraction > 1.0)
        throw InputError("generate_corpus: asym_fraction must lie in [0,1]");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory: " + out_dir.string());

    const int n_asym = static_cast<int>(std::lround(asym_fraction * n));
    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + n_asym, 1);
    std::mt19937_64 rng(seed);
    std::shuffle(labels.begin(), labels.end(), rng);

    std::vector<ManifestRow> rows;
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 prng(splitmix64(seed + static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        PhantomSpec spec;
        spec.width = spec.height = ranges.frame;
        const double s = ranges.frame / 512.0;
        spec.thorax_semi_x = (150.0 + 40.0 * unit(prng)) * s;
        spec.thorax_semi_y = (190.0 + 45.0 * unit(prng)) * s;
        spec.n_rib_pairs = 6 + static_cast<int>(unit(prng) * 5.0);
        spec.rib_thickness = (6.0 + 3.0 * unit(prng)) * s;
        spec.spine_width = (18.0 + 8.0 * unit(prng)) * s;
        spec.spine_tilt_deg = (2.0 * unit(prng) - 1.0) * ranges.tilt_deg_max;
        spec.noise_seed = prng();

        if (labels[i] == 1) {
            const int kind = static_cast<int>(unit(prng) * 3.0);
            spec.asymmetry.side = unit(prng) < 0.5 ? Side::Left : Side::Right;
            if (kind == 0) {
                spec.asymmetry.kind = AsymmetryKind::Scale;
                spec.asymmetry.amount =
                    ranges.scale_min + (ranges.scale_max - ranges.scale_min) * unit(prng);
            } else if (kind == 1) {
                spec.asymmetry.kind = AsymmetryKind::Shear;
                const double deg = ranges.shear_deg_min +
                                   (ranges.shear_deg_max - ranges.shear_deg_min) * unit(prng);
                spec.asymmetry.amount = deg * kPi / 180.0;
            } else {
                spec.asymmetry.kind = AsymmetryKind::Truncate;
                spec.asymmetry.amount =
                    ranges.truncate_min +
                    (ranges.truncate_max - ranges.truncate_min) * unit(prng);
            }
        }

        const Phantom ph = generate(spec);

        char id[16];
        std::snprintf(id, sizeof(id), "p%04d", i);
        ManifestRow row;
        row.id = id;
        row.image = out_dir / (std::string(id) + "_img.png");
        row.ribs_mask = out_dir / (std::string(id) + "_ribs.png");
        row.spine_mask = out_dir / (std::string(id) + "_spine.png");
        row.left_mask = out_dir / (std::string(id) + "_left.png");
        row.right_mask = out_dir / (std::string(id) + "_right.png");
        row.label = ph.label;

        save_gray(ph.radiograph, row.image);
        save_mask(ph.ribs, row.ribs_mask);
        save_mask(ph.spine, row.spine_mask);
        save_mask(ph.truth.left, row.left_mask);
        save_mask(ph.truth.right, row.right_mask);
        rows.push_back(std::move(row));
    }

    save_manifest(out_dir / "manifest.json", rows);
    return rows;
}

BinaryMask recover_bone_mask(const GrayImage& radiograph) {
    const GrayImage smooth = gaussian_blur(radiograph, 3.0);

    std::vector<double> sorted = smooth.pixels;
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double q) {
        const std::size_t idx = static_cast<std::size_t>(q * (sorted.size() - 1));
        return sorted[idx];
    };
    const double bone_level = quantile(0.99);
    const double background_level = quantile(0.5);
    const double threshold = 0.5 * (bone_level + background_level);

    BinaryMask raw = mask_from_image(smooth, std::clamp(threshold, 1e-9, 1.0 - 1e-9));

    // 3x3 majority vote against speckle.
    BinaryMask clean(raw.width, raw.height);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) {
            int votes = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = std::clamp(x + dx, 0, raw.width - 1);
                    const int yy = std::clamp(y + dy, 0, raw.height - 1);
                    votes += raw.at(xx, yy) ? 1 : 0;
                }
            clean.set(x, y, votes >= 5);
        }
    return clean;
}

BinaryMask erase_center_columns(const BinaryMask& mask, double fraction) {
    const auto box = mask.bbox();
    if (!box) return mask;
    const double mid = 0.5 * (box->x0 + box->x1);
    const double half = 0.5 * fraction * box->width();
    BinaryMask out = mask;
    for (int y = 0; y < mask.height; ++y)
        for (int x = std::max(0, static_cast<int>(std::ceil(mid - half)));
             x <= std::min(mask.width - 1, static_cast<int>(std::floor(mid + half))); ++x)
            out.set(x, y, false);
    return out;
}

} // namespace hemisym
