#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "hemisym/features.hpp"

namespace hemisym {

const char* const kFeaturesCsvHeader =
    "id,sim_area,sim_perimeter,sim_centroid_dx,sim_first_rib_width,"
    "hist_jsd,hist_intersection,reg_iou,label";

const std::array<std::string, 7>& FeatureVector::names() {
    static const std::array<std::string, 7> n{
        "sim_area", "sim_perimeter", "sim_centroid_dx", "sim_first_rib_width",
        "hist_jsd", "hist_intersection", "reg_iou"};
    return n;
}

bool Histogram::degenerate() const {
    return std::all_of(bins.begin(), bins.end(), [](double b) { return b == 0.0; });
}

double Histogram::sum() const {
    double s = 0.0;
    for (double b : bins) s += b;
    return s;
}

ShapeStats shape_stats(const BinaryMask& m, const SpineLine& spine, Side side) {
    if (m.empty()) throw InputError("shape_stats: empty mask");

    ShapeStats st;
    double sx = 0.0, sy = 0.0;
    std::size_t area = 0, perim = 0;
    bool have_endpoint = false;
    double best_key = 0.0;
    Vec2 endpoint;

    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            ++area;
            sx += x;
            sy += y;
            const bool boundary =
                x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1 ||
                !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
            if (boundary) ++perim;

            // First-rib endpoint: top-left-most for the left side, top-right-most
            // for the right side, ties resolved by smaller y then smaller x.
            const double key = side == Side::Left ? static_cast<double>(y + x)
                                                  : static_cast<double>(y - x);
            if (!have_endpoint || key < best_key ||
                (key == best_key && (y < endpoint.y || (y == endpoint.y && x < endpoint.x)))) {
                have_endpoint = true;
                best_key = key;
                endpoint = {static_cast<double>(x), static_cast<double>(y)};
            }
        }

    st.area = static_cast<double>(area);
    st.perimeter = static_cast<double>(perim);
    st.centroid = {sx / area, sy / area};
    st.centroid_dx = std::abs(st.centroid.x - spine.x_at(st.centroid.y));
    st.first_rib_endpoint = endpoint;
    st.first_rib_width = std::abs(spine.side_of(endpoint)); // perpendicular distance
    return st;
}

std::pair<Histogram, Histogram> projection_histograms(const BinaryMask& m) {
    if (m.width <= 0 || m.height <= 0)
        throw InputError("projection_histograms: mask dimensions must be positive");
    Histogram horizontal, vertical;
    horizontal.bins.assign(m.height, 0.0);
    vertical.bins.assign(m.width, 0.0);
    std::size_t area = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) {
                horizontal.bins[y] += 1.0;
                vertical.bins[x] += 1.0;
                ++area;
            }
    if (area > 0) {
        for (double& b : horizontal.bins) b /= area;
        for (double& b : vertical.bins) b /= area;
    }
    horizontal.normalized = true;
    vertical.normalized = true;
    return {std::move(horizontal), std::move(vertical)};
}

namespace {

void check_histogram_pair(const Histogram& h1, const Histogram& h2, const char* op) {
    if (h1.bins.size() != h2.bins.size())
        throw InputError(std::string(op) + ": histogram bin counts differ");
    if (!h1.normalized || !h2.normalized)
        throw InputError(std::string(op) + ": histograms must be normalized");
    if (std::abs(h1.sum() - 1.0) > 1e-9 || std::abs(h2.sum() - 1.0) > 1e-9)
        throw InputError(std::string(op) + ": histogram does not sum to 1");
}

} // namespace

double jsd(const Histogram& h1, const Histogram& h2) {
    check_histogram_pair(h1, h2, "jsd");
    double acc = 0.0;
    for (std::size_t i = 0; i < h1.bins.size(); ++i) {
        const double a = h1.bins[i], b = h2.bins[i];
        const double m = 0.5 * (a + b);
        if (a > 0.0) acc += 0.5 * a * std::log2(a / m);
        if (b > 0.0) acc += 0.5 * b * std::log2(b / m);
    }
    return std::clamp(acc, 0.0, 1.0);
}

double hist_intersection(const Histogram& h1, const Histogram& h2) {
    check_histogram_pair(h1, h2, "hist_intersection");
    double acc = 0.0;
    for (std::size_t i = 0; i < h1.bins.size(); ++i) acc += std::min(h1.bins[i], h2.bins[i]);
    return std::clamp(acc, 0.0, 1.0);
}

namespace {

std::int64_t pack(int x, int y) {
    return (static_cast<std::int64_t>(y) << 32) | static_cast<std::int64_t>(x + 0x40000000);
}

} // namespace

RegisteredIou registered_iou(const BinaryMask& left, const BinaryMask& right,
                             const SpineLine& spine) {
    if (left.width != right.width || left.height != right.height)
        throw InputError("registered_iou: dimension mismatch");
    if (left.empty() || right.empty()) return {0.0, true};

    // Mirror the left region across the spine line. Work on coordinate sets
    // so that the subsequent translation cannot push pixels off the frame.
    std::vector<std::pair<int, int>> mirrored;
    std::unordered_set<std::int64_t> seen;
    double msx = 0.0, msy = 0.0;
    for (int y = 0; y < left.height; ++y)
        for (int x = 0; x < left.width; ++x) {
            if (!left.at(x, y)) continue;
            const Vec2 r = spine.reflect({static_cast<double>(x), static_cast<double>(y)});
            const int rx = static_cast<int>(std::lround(r.x));
            const int ry = static_cast<int>(std::lround(r.y));
            if (seen.insert(pack(rx, ry)).second) {
                mirrored.emplace_back(rx, ry);
                msx += rx;
                msy += ry;
            }
        }
    msx /= mirrored.size();
    msy /= mirrored.size();

    const Vec2 rc = right.centroid();
    const int dx = static_cast<int>(std::lround(rc.x - msx));
    const int dy = static_cast<int>(std::lround(rc.y - msy));

    std::unordered_set<std::int64_t> right_set;
    for (int y = 0; y < right.height; ++y)
        for (int x = 0; x < right.width; ++x)
            if (right.at(x, y)) right_set.insert(pack(x, y));

    std::size_t inter = 0;
    for (const auto& [x, y] : mirrored)
        if (right_set.count(pack(x + dx, y + dy))) ++inter;
    const std::size_t uni = mirrored.size() + right_set.size() - inter;
    return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

double similarity_index(double r_left, double r_right) {
    if (r_left < 0.0 || r_right < 0.0)
        throw InputError("similarity_index: inputs must be non-negative");
    if (r_left == 0.0 && r_right == 0.0) return 1.0;
    return std::min(r_left, r_right) / std::max(r_left, r_right);
}

namespace {

// Concatenate a horizontal profile with a vertical profile and renormalize.
Histogram concat_normalized(const Histogram& horizontal, const Histogram& vertical) {
    Histogram out;
    out.bins.reserve(horizontal.bins.size() + vertical.bins.size());
    out.bins.insert(out.bins.end(), horizontal.bins.begin(), horizontal.bins.end());
    out.bins.insert(out.bins.end(), vertical.bins.begin(), vertical.bins.end());
    const double s = out.sum();
    if (s > 0.0)
        for (double& b : out.bins) b /= s;
    out.normalized = true;
    return out;
}

// Reflect a vertical (per-column) profile about the spine axis so a
// mirror-symmetric pair compares identical profiles.
Histogram reflect_vertical(const Histogram& vertical, int reflect_sum) {
    Histogram out;
    out.bins.assign(vertical.bins.size(), 0.0);
    const int w = static_cast<int>(vertical.bins.size());
    for (int i = 0; i < w; ++i) {
        const int j = reflect_sum - i;
        if (j >= 0 && j < w) out.bins[i] = vertical.bins[j];
    }
    out.normalized = vertical.normalized;
    return out;
}

} // namespace

FeatureVector extract_features(const HemithoraxPair& pair) {
    FeatureVector fv;
    if (pair.left.empty() || pair.right.empty()) {
        fv.degenerate = true;
        return fv;
    }

    const ShapeStats ls = shape_stats(pair.left, pair.spine, Side::Left);
    const ShapeStats rs = shape_stats(pair.right, pair.spine, Side::Right);
    fv.sim_area = similarity_index(ls.area, rs.area);
    fv.sim_perimeter = similarity_index(ls.perimeter, rs.perimeter);
    fv.sim_centroid_dx = similarity_index(ls.centroid_dx, rs.centroid_dx);
    fv.sim_first_rib_width = similarity_index(ls.first_rib_width, rs.first_rib_width);

    auto [lh, lv] = projection_histograms(pair.left);
    auto [rh, rv] = projection_histograms(pair.right);

    // Reflection axis: spine x at the combined centroid row, so the profile
    // comparison is invariant to joint translation of masks and spine.
    const double y_eval = (ls.area * ls.centroid.y + rs.area * rs.centroid.y) /
                          (ls.area + rs.area);
    const int reflect_sum = static_cast<int>(std::lround(2.0 * pair.spine.x_at(y_eval)));
    const Histogram lv_reflected = reflect_vertical(lv, reflect_sum);

    const Histogram cl = concat_normalized(lh, lv_reflected);
    const Histogram cr = concat_normalized(rh, rv);
    fv.hist_jsd = std::clamp(1.0 - jsd(cl, cr), 0.0, 1.0);
    fv.hist_intersection = hist_intersection(cl, cr);

    fv.reg_iou = registered_iou(pair.left, pair.right, pair.spine).value;
    return fv;
}

// --- CSV ------------------------------------------------------------------

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open features CSV for writing: " + path.string());
    out << kFeaturesCsvHeader << "\n";
    for (const FeatureRow& row : rows) {
        out << row.id;
        for (double v : row.fv.values()) out << ',' << format_double(v);
        out << ',';
        if (row.label) out << *row.label;
        out << "\n";
    }
    if (!out) throw IoError("failed writing features CSV: " + path.string());
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open features CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError("features CSV is empty: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kFeaturesCsvHeader)
        throw InputError("features CSV has an unexpected header: " + path.string());

    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 9)
            throw InputError("features CSV row " + std::to_string(lineno) +
                             " has " + std::to_string(fields.size()) + " fields (expected 9)");
        FeatureRow row;
        row.id = fields[0];
        std::array<double, 7> vals{};
        for (int i = 0; i < 7; ++i) {
            try {
                vals[i] = std::stod(fields[i + 1]);
            } catch (const std::exception&) {
                throw InputError("features CSV row " + std::to_string(lineno) +
                                 ": bad numeric field '" + fields[i + 1] + "'");
            }
        }
        row.fv.sim_area = vals[0];
        row.fv.sim_perimeter = vals[1];
        row.fv.sim_centroid_dx = vals[2];
        row.fv.sim_first_rib_width = vals[3];
        row.fv.hist_jsd = vals[4];
        row.fv.hist_intersection = vals[5];
        row.fv.reg_iou = vals[6];
        row.fv.degenerate = std::all_of(vals.begin(), vals.end(),
                                        [](double v) { return v == 0.0; });
        if (!fields[8].empty()) {
            if (fields[8] != "0" && fields[8] != "1")
                throw InputError("features CSV row " + std::to_string(lineno) +
                                 ": label must be 0, 1, or empty");
            row.label = fields[8] == "1" ? 1 : 0;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace hemisym
