#pragma once

#include <optional>
#include <vector>

#include "treeshape/measure.hpp"

namespace treeshape {

// Unit vector pointing toward the light source. Normalized on construction.
struct Direction {
    Point n;

    Direction() = default;
    explicit Direction(Point v);
    static Direction from_angle(double theta);  // d=2, (cos, sin)

    int dim() const { return static_cast<int>(n.size()); }
    void validate() const;  // |n| = 1 within 1e-12
};

// Pixel grid on the hyperplane through the origin orthogonal to n. Plane
// coordinates are taken w.r.t. an orthonormal basis of that hyperplane;
// world point of plane coord y: sum_i y_i * basis[i].
struct ProjectionPlane {
    Direction direction;
    std::vector<Point> basis;  // d-1 mutually orthonormal vectors, all ⊥ n
    Point lo;                  // plane coord of the pixel block corner, size d-1
    std::vector<int> pixels;   // pixel count per plane axis, size d-1
    double pixel_width = 0.0;

    double pixel_area() const;
    std::size_t pixel_count() const;
    // Plane coordinate of pixel center.
    double center(int axis, int i) const {
        return lo[axis] + (i + 0.5) * pixel_width;
    }
    void validate() const;  // basis orthonormal and ⊥ n within 1e-12
};

// Projected density Phi^n per pixel (mass per unit (d-1)-volume), row-major
// with the first plane axis fastest.
struct PlaneDensity {
    ProjectionPlane plane;
    std::vector<double> values;
};

// Weighted list of light directions; weights carry intensity units.
struct IntensityModel {
    std::vector<std::pair<Direction, double>> directions;

    double total_weight() const;  // sum of weights (the L1 norm of eta)
    void validate() const;
};

// Plane covering the projection of the grid's domain corners plus one pixel
// of margin on each side.
ProjectionPlane make_projection_plane(const GridSpec& grid, const Direction& n,
                                      double pixel_width);

// Phi^n(y) = integral of f along the ray through each pixel center, by
// midpoint ray marching with step <= half the smallest cell width.
PlaneDensity project_density(const GridDensity& f, const Direction& n,
                             double pixel_width);

// S^n(f) = integral over the plane of (1 - exp(-Phi^n)).
double sunlight_directional(const GridDensity& f, const Direction& n);

// S^n(f; g): light captured by f when an ambient absorbing density g shares
// the columns. Reduces to sunlight_directional when g = 0.
double sunlight_with_obstacle(const GridDensity& f, const GridDensity& g,
                              const Direction& n);

// S^eta: weighted sum over the intensity model's directions; obstacle
// optional.
double sunlight_total(const GridDensity& f, const IntensityModel& eta,
                      const GridDensity* obstacle = nullptr);
std::vector<double> sunlight_per_direction(const GridDensity& f,
                                           const IntensityModel& eta,
                                           const GridDensity* obstacle = nullptr);

// Uniform light from the open upper hemisphere {n_d > 0}: constant intensity
// sigma_d/2, so the total weight is (sigma_d/2)^2 for every sample count.
// d=2 uses equal-arc samples of the half circle, d=3 a Fibonacci spiral.
IntensityModel hemisphere_intensity(int d, int count);

namespace reference {
// Serial reference implementations with straightforward loops and plain
// left-to-right accumulation; used by tests and the benchmark to validate the
// parallel kernels.
PlaneDensity project_density(const GridDensity& f, const Direction& n,
                             double pixel_width);
double sunlight_directional(const GridDensity& f, const Direction& n);
double sunlight_with_obstacle(const GridDensity& f, const GridDensity& g,
                              const Direction& n);
}  // namespace reference

}  // namespace treeshape
