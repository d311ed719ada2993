#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "hemisym/hemithorax.hpp"
#include "hemisym/raster.hpp"

namespace hemisym::test {

/// Unique temp directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hemisym_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline BinaryMask make_disk(int w, int h, double cx, double cy, double r) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
    return m;
}

inline BinaryMask make_rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryMask m(w, h);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.set(x, y, true);
    return m;
}

inline BinaryMask make_vstrip(int w, int h, double center_x, double width,
                              int y0 = -1, int y1 = -1) {
    BinaryMask m(w, h);
    if (y0 < 0) y0 = 0;
    if (y1 < 0) y1 = h - 1;
    for (int y = y0; y <= y1; ++y)
        for (int x = 0; x < w; ++x)
            if (std::abs(x - center_x) <= width / 2.0) m.set(x, y, true);
    return m;
}

inline BinaryMask translate_mask(const BinaryMask& m, int dx, int dy) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y) && out.in_bounds(x + dx, y + dy)) out.set(x + dx, y + dy, true);
    return out;
}

/// Brute-force even-odd point-in-polygon with an explicit on-segment check;
/// independent oracle for the production rasterizer.
inline bool point_in_polygon_oracle(const std::vector<Vec2>& poly, double px, double py) {
    const std::size_t n = poly.size();
    constexpr double eps = 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n];
        const double cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
        const double dot = (px - a.x) * (px - b.x) + (py - a.y) * (py - b.y);
        const double len2 = (b - a).norm2();
        if (len2 > 0 && std::abs(cross) < eps * std::sqrt(len2) && dot <= eps) return true;
    }
    bool inside = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % n];
        if ((a.y <= py && py < b.y) || (b.y <= py && py < a.y)) {
            const double x_cross = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
            if (x_cross < px) inside = !inside;
        }
    }
    return inside;
}

/// True when the closed polyline has no self-intersections (shared endpoints
/// of adjacent segments excluded).
inline bool is_simple_polyline(const std::vector<Vec2>& poly) {
    const std::size_t n = poly.size();
    const auto segs_intersect = [](Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
        const auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
            const double v = (b - a).cross(c - a);
            return v > 1e-12 ? 1 : (v < -1e-12 ? -1 : 0);
        };
        const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
        const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
        return o1 != o2 && o3 != o4;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue; // adjacent through the wrap
            if (segs_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Run the hemisym binary with the given argument string.
inline CliResult run_cli(const std::string& args, const std::filesystem::path& workdir) {
    const std::filesystem::path out_file = workdir / "cli_stdout.txt";
    const std::filesystem::path err_file = workdir / "cli_stderr.txt";
    const std::string cmd = std::string(HEMISYM_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int ret = std::system(cmd.c_str());

    CliResult r;
    r.exit_code = WIFEXITED(ret) ? WEXITSTATUS(ret) : -1;
    const auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace hemisym::test
