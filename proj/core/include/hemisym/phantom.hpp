#pragma once

#include "hemisym/eval.hpp"

namespace hemisym {

enum class AsymmetryKind { None, Scale, Shear, Truncate };

/// Deformation applied to one side of an otherwise mirror-symmetric phantom.
///   Scale:    horizontal compression toward the spine; amount is the factor,
///             so the side's area scales by roughly the same factor.
///   Shear:    vertical shear proportional to the distance from the spine;
///             amount is the angle in radians.
///   Truncate: the bottom `amount` fraction of the side's vertical extent is
///             removed.
struct Asymmetry {
    AsymmetryKind kind = AsymmetryKind::None;
    Side side = Side::Left;
    double amount = 0.0;
};

struct PhantomSpec {
    int width = 512;
    int height = 512;
    int n_rib_pairs = 8;
    double rib_thickness = 7.0;   // band thickness in pixels
    double thorax_semi_x = 170.0; // horizontal semi-axis
    double thorax_semi_y = 215.0; // vertical semi-axis
    double spine_width = 22.0;
    double spine_tilt_deg = 0.0;  // tilt of the spine from vertical
    Asymmetry asymmetry;
    std::uint64_t noise_seed = 0; // seeds the faint rendering speckle

    Ellipse thorax_ellipse() const;
    void validate() const;
};

struct Phantom {
    GrayImage radiograph;
    BinaryMask ribs;
    BinaryMask spine;
    HemithoraxPair truth;
    int label = 0; // 1 = asymmetric
};

/// Deterministic synthetic radiograph: rib bands as concentric elliptic arcs
/// mirrored across the spine, the outermost band flush with the thorax
/// boundary; truth = the analytic thorax region split by the fitted spine
/// line. Rendering: ribs/spine 0.85, lung field 0.2, background 0.55.
Phantom generate(const PhantomSpec& spec);

/// Sampling ranges for randomized corpora.
struct CorpusRanges {
    double scale_min = 0.5, scale_max = 0.85;
    double shear_deg_min = 5.0, shear_deg_max = 15.0;
    double truncate_min = 0.15, truncate_max = 0.4;
    double tilt_deg_max = 3.0;
    int frame = 512;
};

/// Write n phantoms (images, masks, truth hemithoraces) plus a manifest.json
/// under out_dir. Exactly round(n * asym_fraction) rows are asymmetric.
std::vector<ManifestRow> generate_corpus(int n, double asym_fraction, std::uint64_t seed,
                                         const std::filesystem::path& out_dir,
                                         const CorpusRanges& ranges = {});

/// Stand-in for a trained bone segmenter on phantom renderings: blur, then
/// threshold midway between the bone level (99th percentile) and the
/// background level (median), then a 3x3 majority vote against speckle.
/// Quantile levels track monotone intensity remaps, which is what makes the
/// recovery stable under exposure changes.
BinaryMask recover_bone_mask(const GrayImage& radiograph);

/// Erase the central `fraction` band of columns of the mask's bounding box
/// (the obscured-ribs scenario).
BinaryMask erase_center_columns(const BinaryMask& mask, double fraction = 1.0 / 3.0);

} // namespace hemisym
