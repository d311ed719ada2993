#pragma once

#include <string>
#include <vector>

#include "hemisym/raster.hpp"

namespace hemisym {

/// Closed polyline with sub-pixel vertices. Construction validates the
/// invariants: at least 8 vertices and no consecutive pair (including the
/// wrap-around) closer than 1e-6.
struct Contour {
    std::vector<Vec2> vertices;

    Contour() = default;
    explicit Contour(std::vector<Vec2> v);

    std::size_t size() const { return vertices.size(); }
    double perimeter() const;
};

struct SnakeParams {
    double alpha = 0.1;          // elasticity weight
    double beta = 1.0;           // stiffness weight
    double step_size = 0.5;      // target max vertex displacement per iteration (px)
    int max_iters = 2000;
    double tol = 0.1;            // convergence: max vertex displacement (px)
    int n_vertices = 200;
    double field_smoothing = 3.0; // Gaussian blur radius for the external field (px)

    void validate() const;
    /// Strict JSON parse; the exact key set is
    /// {alpha, beta, step_size, max_iters, tol, n_vertices, field_smoothing},
    /// all optional, unknown keys rejected.
    static SnakeParams from_json_text(const std::string& text);
    static SnakeParams from_json_file(const std::filesystem::path& path);
    std::string to_json_text() const;
};

/// External energy and its spatial gradient on the image grid.
struct EnergyField {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<double> grad_x;
    std::vector<double> grad_y;

    double sample_value(double x, double y) const;
    Vec2 sample_grad(double x, double y) const;
};

/// Build the external field from a mask rendered as a {0,1} image:
/// field = -|grad(G_sigma * I)|^2, with G_sigma the Gaussian blur of radius
/// params.field_smoothing. grad_x/grad_y are central differences of the field.
EnergyField external_energy_field(const BinaryMask& mask, const SnakeParams& params);

/// Axis-aligned bounding rectangle of the mask, expanded by margin on all
/// sides, clipped to the frame, and resampled to n_vertices equally spaced
/// vertices.
Contour init_rectangle(const BinaryMask& ribs, double margin, int n_vertices);

/// Discrete internal energy, cyclic indexing:
/// sum_i alpha*|v_{i+1}-v_i|^2 + beta*|v_{i+1}-2v_i+v_{i-1}|^2.
double internal_energy(const Contour& c, double alpha, double beta);

/// Total snake energy: internal plus the field sampled at each vertex.
double snake_energy(const Contour& c, const EnergyField& field, const SnakeParams& params);

struct SnakeResult {
    Contour contour;
    std::vector<double> energy_trace; // energy_trace[0] is the initial energy
    int iterations = 0;
    bool converged = false;
};

/// Evolve the contour to a local minimum of the snake energy.
///
/// Each iteration takes a damped implicit step on the internal energy with
/// the external gradient sampled bilinearly at the current vertices, scaled
/// so the largest vertex moves about step_size pixels. A candidate step is
/// accepted only if the total energy does not increase; otherwise the step
/// is halved and retried (reset each iteration), so the recorded energy
/// trace is non-increasing. Vertices are clamped to the frame, resampled to
/// equal arc length every 25 iterations (kept only when that does not raise
/// the energy), and iteration stops when the max displacement drops below
/// params.tol or max_iters is reached.
SnakeResult evolve(const Contour& init, const EnergyField& field, const SnakeParams& params);

/// Even-odd rasterization of the closed contour. A pixel belongs to the mask
/// when its center is strictly inside or lies on an edge.
BinaryMask contour_to_mask(const Contour& c, int width, int height);

/// Resample a closed polyline to n points equally spaced in arc length.
std::vector<Vec2> resample_closed(const std::vector<Vec2>& poly, int n);

} // namespace hemisym
