#pragma once

// Seeded random fixtures shared by the selftest battery and the test suites.

#include <random>

#include "treeshape/measure.hpp"
#include "treeshape/sunlight.hpp"

namespace treeshape::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::ldexp(static_cast<double>(rng() >> 11), -53);
}

// Piecewise-constant random field on [-1,1]^2: a small base plus a few
// rectangles of O(1) density, so projected columns stay well away from the
// linear regime of 1 - e^-x.
inline GridDensity random_blocks_field(std::mt19937_64& rng, int res = 64,
                                       int blocks = 4) {
    GridSpec spec{BoxDomain{{-1.0, -1.0}, {1.0, 1.0}}, {res, res}};
    GridDensity f(spec, 0.05);
    for (int b = 0; b < blocks; ++b) {
        const double x0 = uniform(rng, -1.0, 0.6);
        const double y0 = uniform(rng, -1.0, 0.6);
        const double wx = uniform(rng, 0.2, 0.9);
        const double wy = uniform(rng, 0.2, 0.9);
        const double v = uniform(rng, 0.4, 2.0);
        for (int iy = 0; iy < res; ++iy) {
            for (int ix = 0; ix < res; ++ix) {
                const double cx = spec.center(0, ix);
                const double cy = spec.center(1, iy);
                if (cx >= x0 && cx <= x0 + wx && cy >= y0 && cy <= y0 + wy)
                    f.cells[std::size_t(iy) * res + ix] += v;
            }
        }
    }
    return f;
}

// Field supported in a ball around the origin; returns the exact support
// radius (covering whole cells) through ball_radius.
inline GridDensity random_ball_field(std::mt19937_64& rng, int res,
                                     double& ball_radius) {
    GridSpec spec{BoxDomain{{-1.0, -1.0}, {1.0, 1.0}}, {res, res}};
    GridDensity f(spec, 0.0);
    const double r = uniform(rng, 0.6, 0.85);
    const double v = uniform(rng, 0.5, 4.0);
    const double half_diag =
        0.5 * std::sqrt(spec.cell_width(0) * spec.cell_width(0) +
                        spec.cell_width(1) * spec.cell_width(1));
    double max_center = 0.0;
    for (int iy = 0; iy < res; ++iy) {
        for (int ix = 0; ix < res; ++ix) {
            const double cx = spec.center(0, ix);
            const double cy = spec.center(1, iy);
            const double rr = std::sqrt(cx * cx + cy * cy);
            if (rr + half_diag <= r) {
                f.cells[std::size_t(iy) * res + ix] =
                    v * uniform(rng, 0.5, 1.0);
                max_center = std::max(max_center, rr);
            }
        }
    }
    ball_radius = max_center + half_diag;
    return f;
}

inline DiscreteMeasure random_measure(std::mt19937_64& rng, int d, int min_atoms,
                                      int max_atoms, double box_radius) {
    const int n = min_atoms + static_cast<int>(rng() % (max_atoms - min_atoms + 1));
    DiscreteMeasure mu;
    mu.dim = d;
    for (int i = 0; i < n; ++i) {
        Atom a;
        a.position.resize(d);
        for (int c = 0; c < d; ++c)
            a.position[c] = uniform(rng, -box_radius, box_radius);
        a.mass = uniform(rng, 0.1, 1.0);
        mu.atoms.push_back(std::move(a));
    }
    return mu;
}

inline Direction random_direction2(std::mt19937_64& rng) {
    return Direction::from_angle(uniform(rng, 0.0, 2.0 * M_PI));
}

}  // namespace treeshape::testing
