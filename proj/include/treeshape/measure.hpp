#pragma once

#include <vector>

#include "treeshape/common.hpp"

namespace treeshape {

// One point mass. Mass is strictly positive; positions are finite.
struct Atom {
    Point position;
    double mass = 0.0;
};

// Finite positive atomic measure on R^d. Empty atom list (total mass 0) is a
// valid measure.
struct DiscreteMeasure {
    int dim = 2;
    std::vector<Atom> atoms;

    DiscreteMeasure() = default;
    DiscreteMeasure(int d, std::vector<Atom> a);

    void validate() const;  // throws std::invalid_argument on broken invariants
};

// Axis-aligned box, lower < upper componentwise.
struct BoxDomain {
    Point lower;
    Point upper;

    BoxDomain() = default;
    BoxDomain(Point lo, Point hi);

    int dim() const { return static_cast<int>(lower.size()); }
    double extent(int axis) const { return upper[axis] - lower[axis]; }
    double volume() const;
    bool contains(std::span<const double> p) const;
};

// Grid layout without cell data: shared by GridDensity construction and the
// rasterizer.
struct GridSpec {
    BoxDomain domain;
    std::vector<int> resolution;  // cells per axis

    int dim() const { return domain.dim(); }
    std::size_t cell_count() const;
    double cell_width(int axis) const {
        return domain.extent(axis) / resolution[axis];
    }
    double min_cell_width() const;
    double max_cell_width() const;
    double cell_volume() const;
    // Center coordinate of cell index i along the given axis.
    double center(int axis, int i) const {
        return domain.lower[axis] + (i + 0.5) * cell_width(axis);
    }
    void validate() const;
};

// Nonnegative density field on an axis-aligned voxel grid, row-major with the
// x index fastest. Cell values are mass per unit d-volume.
struct GridDensity {
    GridSpec spec;
    std::vector<double> cells;

    GridDensity() = default;
    explicit GridDensity(GridSpec s, double fill = 0.0);
    GridDensity(GridSpec s, std::vector<double> values);

    int dim() const { return spec.dim(); }
    double& at(std::span<const int> idx);
    double at(std::span<const int> idx) const;
    // Point lookup, piecewise constant per cell; 0 outside the domain.
    double value_at(std::span<const double> p) const;
    bool same_spec(const GridDensity& other) const;
    void validate() const;
};

double total_mass(const DiscreteMeasure& mu);
double total_mass(const GridDensity& f);

// mu^lambda: every atom position scaled by lambda, masses unchanged.
DiscreteMeasure dilate(const DiscreteMeasure& mu, double lambda);

// lambda * mu: masses (or cell values) scaled, positions unchanged.
DiscreteMeasure scale_mass(const DiscreteMeasure& mu, double lambda);
GridDensity scale_mass(const GridDensity& f, double lambda);

DiscreteMeasure add(const DiscreteMeasure& a, const DiscreteMeasure& b);
GridDensity add(const GridDensity& a, const GridDensity& b);

// Smears each atom into a compactly supported radial bump (1 - (r/R)^2)^2 of
// support radius R, renormalized after clipping to the domain so the grid
// carries exactly the atom's mass. Requires radius >= 2 cell widths and every
// atom within the domain inflated by radius.
GridDensity rasterize(const DiscreteMeasure& mu, const GridSpec& grid,
                      double radius);

}  // namespace treeshape
