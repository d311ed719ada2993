#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hemisym/snake.hpp"

namespace hemisym {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMinVertexSpacing = 1e-6;
} // namespace

Contour::Contour(std::vector<Vec2> v) : vertices(std::move(v)) {
    if (vertices.size() < 8)
        throw InputError("contour needs at least 8 vertices");
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (distance(vertices[i], vertices[(i + 1) % n]) < kMinVertexSpacing)
            throw InputError("contour has consecutive duplicate vertices");
    }
}

double Contour::perimeter() const {
    double p = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) p += distance(vertices[i], vertices[(i + 1) % n]);
    return p;
}

void SnakeParams::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw InputError("snake weights must be non-negative");
    if (!(step_size > 0.0)) throw InputError("step_size must be positive");
    if (max_iters < 1) throw InputError("max_iters must be at least 1");
    if (!(tol > 0.0)) throw InputError("tol must be positive");
    if (n_vertices < 8) throw InputError("n_vertices must be at least 8");
    if (field_smoothing < 0.0) throw InputError("field_smoothing must be non-negative");
}

SnakeParams SnakeParams::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("snake params: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("snake params: expected a JSON object");
    SnakeParams p;
    for (const auto& [key, value] : j.items()) {
        if (key == "alpha") p.alpha = value.get<double>();
        else if (key == "beta") p.beta = value.get<double>();
        else if (key == "step_size") p.step_size = value.get<double>();
        else if (key == "max_iters") p.max_iters = value.get<int>();
        else if (key == "tol") p.tol = value.get<double>();
        else if (key == "n_vertices") p.n_vertices = value.get<int>();
        else if (key == "field_smoothing") p.field_smoothing = value.get<double>();
        else throw InputError("snake params: unknown key '" + key + "'");
    }
    p.validate();
    return p;
}

SnakeParams SnakeParams::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open snake params: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string SnakeParams::to_json_text() const {
    nlohmann::json j{
        {"alpha", alpha},       {"beta", beta},
        {"step_size", step_size}, {"max_iters", max_iters},
        {"tol", tol},           {"n_vertices", n_vertices},
        {"field_smoothing", field_smoothing},
    };
    return j.dump();
}

namespace {

double bilinear(const std::vector<double>& grid, int w, int h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(x), w - 2 >= 0 ? w - 2 : 0);
    const int y0 = std::min(static_cast<int>(y), h - 2 >= 0 ? h - 2 : 0);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const auto v = [&](int xx, int yy) { return grid[static_cast<size_t>(yy) * w + xx]; };
    return (1 - fx) * (1 - fy) * v(x0, y0) + fx * (1 - fy) * v(x1, y0) +
           (1 - fx) * fy * v(x0, y1) + fx * fy * v(x1, y1);
}

} // namespace

double EnergyField::sample_value(double x, double y) const {
    return bilinear(values, width, height, x, y);
}

Vec2 EnergyField::sample_grad(double x, double y) const {
    return {bilinear(grad_x, width, height, x, y), bilinear(grad_y, width, height, x, y)};
}

EnergyField external_energy_field(const BinaryMask& mask, const SnakeParams& params) {
    if (mask.empty()) throw InputError("external energy field: empty mask");
    const int w = mask.width, h = mask.height;

    GrayImage img(w, h);
    for (size_t i = 0; i < mask.bits.size(); ++i) img.pixels[i] = mask.bits[i] ? 1.0 : 0.0;
    const GrayImage smooth = gaussian_blur(img, params.field_smoothing);

    EnergyField f;
    f.width = w;
    f.height = h;
    f.values.resize(img.size());
    f.grad_x.resize(img.size());
    f.grad_y.resize(img.size());

    const auto central = [&](const std::vector<double>& g, int x, int y, bool horizontal) {
        const int xm = horizontal ? std::max(x - 1, 0) : x;
        const int xp = horizontal ? std::min(x + 1, w - 1) : x;
        const int ym = horizontal ? y : std::max(y - 1, 0);
        const int yp = horizontal ? y : std::min(y + 1, h - 1);
        return (g[static_cast<size_t>(yp) * w + xp] - g[static_cast<size_t>(ym) * w + xm]) / 2.0;
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = central(smooth.pixels, x, y, true);
            const double gy = central(smooth.pixels, x, y, false);
            f.values[static_cast<size_t>(y) * w + x] = -(gx * gx + gy * gy);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            f.grad_x[static_cast<size_t>(y) * w + x] = central(f.values, x, y, true);
            f.grad_y[static_cast<size_t>(y) * w + x] = central(f.values, x, y, false);
        }
    return f;
}

std::vector<Vec2> resample_closed(const std::vector<Vec2>& poly, int n) {
    const std::size_t m = poly.size();
    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        cum[i + 1] = cum[i] + distance(poly[i], poly[(i + 1) % m]);
    const double total = cum[m];
    std::vector<Vec2> out(n);
    if (total <= 0.0) {
        std::fill(out.begin(), out.end(), poly[0]);
        return out;
    }
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        const double target = total * k / n;
        while (seg + 1 < m && cum[seg + 1] < target) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        out[k] = poly[seg] + t * (poly[(seg + 1) % m] - poly[seg]);
    }
    return out;
}

Contour init_rectangle(const BinaryMask& ribs, double margin, int n_vertices) {
    const auto box = ribs.bbox();
    if (!box) throw InputError("init_rectangle: empty mask");
    if (n_vertices < 8) throw InputError("init_rectangle: n_vertices must be at least 8");

    const double x0 = std::max(0.0, box->x0 - margin);
    const double y0 = std::max(0.0, box->y0 - margin);
    const double x1 = std::min<double>(ribs.width - 1, box->x1 + margin);
    const double y1 = std::min<double>(ribs.height - 1, box->y1 + margin);

    const std::vector<Vec2> rect{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    return Contour(resample_closed(rect, n_vertices));
}

namespace {

double internal_energy_raw(const std::vector<Vec2>& v, double alpha, double beta) {
    const std::size_t n = v.size();
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& prev = v[(i + n - 1) % n];
        const Vec2& cur = v[i];
        const Vec2& next = v[(i + 1) % n];
        e += alpha * (next - cur).norm2();
        const Vec2 d = next - 2.0 * cur + prev;
        e += beta * d.norm2();
    }
    return e;
}

double total_energy_raw(const std::vector<Vec2>& v, const EnergyField& field,
                        const SnakeParams& p) {
    double e = internal_energy_raw(v, p.alpha, p.beta);
    for (const Vec2& q : v) e += field.sample_value(q.x, q.y);
    return e;
}

// Cyclic convolution kernel for (I + s*A)^-1 where A = 2(alpha*L + beta*L^2)
// is the internal-energy Hessian and L the cyclic second-difference operator.
// A is circulant, so the inverse is too; its first row is recovered from the
// analytic eigenvalues.
std::vector<double> implicit_kernel(int n, double s, double alpha, double beta) {
    std::vector<double> inv_eig(n);
    for (int k = 0; k < n; ++k) {
        const double lam = 2.0 - 2.0 * std::cos(2.0 * kPi * k / n);
        const double mu = 2.0 * (alpha * lam + beta * lam * lam);
        inv_eig[k] = 1.0 / (1.0 + s * mu);
    }
    std::vector<double> kernel(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += inv_eig[k] * std::cos(2.0 * kPi * k * j / n);
        kernel[j] = acc / n;
    }
    return kernel;
}

std::vector<Vec2> apply_cyclic(const std::vector<double>& kernel, const std::vector<Vec2>& u) {
    const int n = static_cast<int>(u.size());
    std::vector<Vec2> out(n);
    for (int i = 0; i < n; ++i) {
        double ax = 0.0, ay = 0.0;
        for (int j = 0; j < n; ++j) {
            const double kkk = kernel[(i - j + n) % n];
            ax += kkk * u[j].x;
            ay += kkk * u[j].y;
        }
        out[i] = {ax, ay};
    }
    return out;
}

} // namespace

double internal_energy(const Contour& c, double alpha, double beta) {
    return internal_energy_raw(c.vertices, alpha, beta);
}

double snake_energy(const Contour& c, const EnergyField& field, const SnakeParams& params) {
    return total_energy_raw(c.vertices, field, params);
}

SnakeResult evolve(const Contour& init, const EnergyField& field, const SnakeParams& params) {
    params.validate();
    const int w = field.width, h = field.height;
    for (const Vec2& v : init.vertices)
        if (v.x < 0.0 || v.x > w - 1 || v.y < 0.0 || v.y > h - 1)
            throw InputError("evolve: initial contour lies outside the field bounds");

    std::vector<Vec2> cur = init.vertices;
    const int n = static_cast<int>(cur.size());
    std::unordered_map<int, std::vector<double>> kernels; // key: log2 of the step scale

    const auto kernel_for = [&](int e) -> const std::vector<double>& {
        auto it = kernels.find(e);
        if (it == kernels.end())
            it = kernels.emplace(e, implicit_kernel(n, std::ldexp(1.0, e), params.alpha,
                                                    params.beta)).first;
        return it->second;
    };

    SnakeResult result;
    double cur_energy = total_energy_raw(cur, field, params);
    result.energy_trace.push_back(cur_energy);

    constexpr int kMinExp = -40, kMaxExp = 20;
    int small_steps = 0; // consecutive iterations below tol
    int iter = 0;
    for (; iter < params.max_iters; ++iter) {
        // Full gradient, used only to scale the step.
        double gmax = 0.0;
        std::vector<Vec2> g_ext(n);
        for (int i = 0; i < n; ++i) {
            const Vec2& prev = cur[(i + n - 1) % n];
            const Vec2& next = cur[(i + 1) % n];
            const Vec2 d_prev = cur[i] - 2.0 * prev + cur[(i + n - 2) % n];
            const Vec2 d_cur = next - 2.0 * cur[i] + prev;
            const Vec2 d_next = cur[(i + 2) % n] - 2.0 * next + cur[i];
            const Vec2 g_int = 2.0 * params.alpha * (2.0 * cur[i] - prev - next) +
                               2.0 * params.beta * (d_prev - 2.0 * d_cur + d_next);
            g_ext[i] = field.sample_grad(cur[i].x, cur[i].y);
            gmax = std::max(gmax, (g_int + g_ext[i]).norm());
        }
        if (gmax < 1e-14) {
            result.converged = true;
            break;
        }

        int e = std::clamp(static_cast<int>(std::floor(std::log2(params.step_size / gmax))),
                           kMinExp, kMaxExp);

        // Backtracking: shrink the step scale until the energy does not rise.
        std::vector<Vec2> cand;
        double cand_energy = cur_energy;
        double max_disp = 0.0;
        bool accepted = false;
        for (; e >= kMinExp; --e) {
            const double s = std::ldexp(1.0, e);
            std::vector<Vec2> rhs(n);
            for (int i = 0; i < n; ++i) rhs[i] = cur[i] - s * g_ext[i];
            cand = apply_cyclic(kernel_for(e), rhs);
            max_disp = 0.0;
            for (int i = 0; i < n; ++i) {
                cand[i].x = std::clamp(cand[i].x, 0.0, static_cast<double>(w - 1));
                cand[i].y = std::clamp(cand[i].y, 0.0, static_cast<double>(h - 1));
                if (!std::isfinite(cand[i].x) || !std::isfinite(cand[i].y))
                    throw NumericError("snake optimization diverged at iteration " +
                                       std::to_string(iter));
                max_disp = std::max(max_disp, distance(cand[i], cur[i]));
            }
            cand_energy = total_energy_raw(cand, field, params);
            if (cand_energy <= cur_energy) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.converged = true; // no descent step exists at any scale
            break;
        }

        cur = std::move(cand);
        cur_energy = cand_energy;

        // Periodic reparameterization against vertex bunching; keep it only
        // when it does not raise the energy.
        if ((iter + 1) % 25 == 0) {
            std::vector<Vec2> res = resample_closed(cur, n);
            const double res_energy = total_energy_raw(res, field, params);
            if (res_energy <= cur_energy) {
                cur = std::move(res);
                cur_energy = res_energy;
            }
        }

        result.energy_trace.push_back(cur_energy);
        small_steps = max_disp < params.tol ? small_steps + 1 : 0;
        if (small_steps >= 3) {
            result.converged = true;
            ++iter;
            break;
        }
    }
    result.iterations = iter;

    // Repair sub-epsilon spacing before constructing the contour.
    bool needs_resample = false;
    for (int i = 0; i < n; ++i)
        if (distance(cur[i], cur[(i + 1) % n]) < kMinVertexSpacing) needs_resample = true;
    if (needs_resample) {
        std::vector<Vec2> unique;
        unique.reserve(cur.size());
        for (const Vec2& v : cur)
            if (unique.empty() || distance(unique.back(), v) >= kMinVertexSpacing)
                unique.push_back(v);
        double total = 0.0;
        for (std::size_t i = 0; i < unique.size(); ++i)
            total += distance(unique[i], unique[(i + 1) % unique.size()]);
        if (unique.size() >= 3 && total > n * kMinVertexSpacing * 2) {
            cur = resample_closed(unique, n);
        } else {
            // Fully collapsed contour: spread vertices on a tiny circle
            // around the collapse point so the invariants hold.
            const Vec2 c = unique.empty() ? Vec2{0, 0} : unique[0];
            cur.resize(n);
            for (int i = 0; i < n; ++i) {
                const double a = 2.0 * kPi * i / n;
                cur[i] = {std::clamp(c.x + 1e-3 * std::cos(a), 0.0, static_cast<double>(w - 1)),
                          std::clamp(c.y + 1e-3 * std::sin(a), 0.0, static_cast<double>(h - 1))};
            }
        }
    }

    result.contour = Contour(std::move(cur));
    return result;
}

BinaryMask contour_to_mask(const Contour& c, int width, int height) {
    const std::vector<Vec2>& v = c.vertices;
    const std::size_t n = v.size();
    BinaryMask mask(width, height);

    // Scanline even-odd fill over pixel centers with a half-open edge rule.
    std::vector<double> crossings;
    for (int j = 0; j < height; ++j) {
        crossings.clear();
        const double yl = j;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = v[i];
            const Vec2& b = v[(i + 1) % n];
            if (a.y == b.y) continue;
            const bool downward = a.y <= yl && yl < b.y;
            const bool upward = b.y <= yl && yl < a.y;
            if (downward || upward)
                crossings.push_back(a.x + (yl - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(crossings.begin(), crossings.end());
        // A center x is interior iff an odd number of crossings lies strictly
        // left of it, i.e. x in (c[2i], c[2i+1]].
        for (std::size_t p = 0; p + 1 < crossings.size(); p += 2) {
            const int xs = static_cast<int>(std::floor(crossings[p])) + 1;
            const int xe = static_cast<int>(std::floor(crossings[p + 1]));
            for (int x = std::max(0, xs); x <= std::min(width - 1, xe); ++x)
                mask.set(x, j, true);
        }
    }

    // Pixel centers lying exactly on an edge are members regardless of parity.
    constexpr double kEdgeEps = 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % n];
        if (std::abs(a.y - b.y) < kEdgeEps) {
            const double yr = std::round(a.y);
            if (std::abs(a.y - yr) < kEdgeEps && yr >= 0 && yr < height) {
                const int xs = static_cast<int>(std::ceil(std::min(a.x, b.x) - kEdgeEps));
                const int xe = static_cast<int>(std::floor(std::max(a.x, b.x) + kEdgeEps));
                for (int x = std::max(0, xs); x <= std::min(width - 1, xe); ++x)
                    mask.set(x, static_cast<int>(yr), true);
            }
            continue;
        }
        const int ys = static_cast<int>(std::ceil(std::min(a.y, b.y) - kEdgeEps));
        const int ye = static_cast<int>(std::floor(std::max(a.y, b.y) + kEdgeEps));
        for (int yy = std::max(0, ys); yy <= std::min(height - 1, ye); ++yy) {
            const double t = (yy - a.y) / (b.y - a.y);
            if (t < -kEdgeEps || t > 1.0 + kEdgeEps) continue;
            const double xc = a.x + t * (b.x - a.x);
            const double xr = std::round(xc);
            if (std::abs(xc - xr) < kEdgeEps && xr >= 0 && xr < width)
                mask.set(static_cast<int>(xr), yy, true);
        }
    }
    return mask;
}

} // namespace hemisym
