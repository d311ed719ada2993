#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hemisym/hemithorax.hpp"

namespace hemisym {

struct Histogram {
    std::vector<double> bins;
    bool normalized = false;

    /// All-zero bins of an empty region.
    bool degenerate() const;
    double sum() const;
};

enum class Side { Left, Right };

struct ShapeStats {
    double area = 0.0;            // member pixel count
    double perimeter = 0.0;       // member pixels 4-adjacent to background or frame edge
    Vec2 centroid;
    double centroid_dx = 0.0;     // |centroid.x - spine x at the centroid row|
    double first_rib_width = 0.0; // distance from the first-rib endpoint to the spine line
    Vec2 first_rib_endpoint;
};

/// The seven per-radiograph similarity values, each in [0,1] with 1 meaning
/// perfectly symmetric. degenerate marks pairs with an empty hemithorax.
struct FeatureVector {
    double sim_area = 0.0;
    double sim_perimeter = 0.0;
    double sim_centroid_dx = 0.0;
    double sim_first_rib_width = 0.0;
    double hist_jsd = 0.0;          // 1 - JSD, so 1 = identical profiles
    double hist_intersection = 0.0;
    double reg_iou = 0.0;
    bool degenerate = false;

    std::array<double, 7> values() const {
        return {sim_area, sim_perimeter, sim_centroid_dx, sim_first_rib_width,
                hist_jsd, hist_intersection, reg_iou};
    }
    static const std::array<std::string, 7>& names();
};

ShapeStats shape_stats(const BinaryMask& side_mask, const SpineLine& spine, Side side);

/// Row/column pixel-count profiles, normalized to sum 1 (all-zero for an
/// empty mask). Returns {horizontal (per row), vertical (per column)}.
std::pair<Histogram, Histogram> projection_histograms(const BinaryMask& side_mask);

/// Jensen-Shannon divergence with base-2 logarithms, range [0,1].
double jsd(const Histogram& h1, const Histogram& h2);

/// Sum of per-bin minima of two normalized histograms, range [0,1].
double hist_intersection(const Histogram& h1, const Histogram& h2);

struct RegisteredIou {
    double value = 0.0;
    bool degenerate = false;
};

/// Mirror the left mask across the spine line, translate its centroid onto
/// the right mask's centroid (integer translation), and return the IoU of
/// the aligned pair. Position in the frame does not matter.
RegisteredIou registered_iou(const BinaryMask& left, const BinaryMask& right,
                             const SpineLine& spine);

/// min/max ratio of two non-negative scalars; sim(0,0) = 1.
double similarity_index(double r_left, double r_right);

FeatureVector extract_features(const HemithoraxPair& pair);

// --- CSV serialization ----------------------------------------------------

struct FeatureRow {
    std::string id;
    FeatureVector fv;
    std::optional<int> label; // 0 symmetric, 1 asymmetric, empty when unlabeled
};

extern const char* const kFeaturesCsvHeader;

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);

} // namespace hemisym
