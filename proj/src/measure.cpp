#include "treeshape/measure.hpp"

#include <algorithm>
#include <cmath>

#include "treeshape/parallel.hpp"

namespace treeshape {

DiscreteMeasure::DiscreteMeasure(int d, std::vector<Atom> a)
    : dim(d), atoms(std::move(a)) {
    validate();
}

void DiscreteMeasure::validate() const {
    if (dim < 2) throw std::invalid_argument("measure: dimension must be >= 2");
    for (const Atom& a : atoms) {
        if (static_cast<int>(a.position.size()) != dim)
            throw std::invalid_argument("measure: atom dimension mismatch");
        if (!all_finite(a.position))
            throw std::invalid_argument("measure: non-finite atom coordinate");
        if (!(a.mass > 0.0) || !std::isfinite(a.mass))
            throw std::invalid_argument("measure: atom mass must be > 0");
    }
}

BoxDomain::BoxDomain(Point lo, Point hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty())
        throw std::invalid_argument("box: corner dimension mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) ||
            !std::isfinite(upper[i]))
            throw std::invalid_argument("box: lower < upper required per axis");
}

double BoxDomain::volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= extent(a);
    return v;
}

bool BoxDomain::contains(std::span<const double> p) const {
    for (int a = 0; a < dim(); ++a)
        if (p[a] < lower[a] || p[a] > upper[a]) return false;
    return true;
}

std::size_t GridSpec::cell_count() const {
    std::size_t n = 1;
    for (int r : resolution) n *= static_cast<std::size_t>(r);
    return n;
}

double GridSpec::min_cell_width() const {
    double w = cell_width(0);
    for (int a = 1; a < dim(); ++a) w = std::min(w, cell_width(a));
    return w;
}

double GridSpec::max_cell_width() const {
    double w = cell_width(0);
    for (int a = 1; a < dim(); ++a) w = std::max(w, cell_width(a));
    return w;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= cell_width(a);
    return v;
}

void GridSpec::validate() const {
    if (static_cast<int>(resolution.size()) != dim())
        throw std::invalid_argument("grid: resolution dimension mismatch");
    for (int r : resolution)
        if (r < 1) throw std::invalid_argument("grid: resolution must be >= 1");
}

GridDensity::GridDensity(GridSpec s, double fill) : spec(std::move(s)) {
    spec.validate();
    cells.assign(spec.cell_count(), fill);
    if (fill < 0.0 || !std::isfinite(fill))
        throw std::invalid_argument("grid: negative or non-finite fill");
}

GridDensity::GridDensity(GridSpec s, std::vector<double> values)
    : spec(std::move(s)), cells(std::move(values)) {
    spec.validate();
    if (cells.size() != spec.cell_count())
        throw std::invalid_argument("grid: cell count mismatch");
    validate();
}

static std::size_t flat_index(const GridSpec& spec, std::span<const int> idx) {
    std::size_t k = 0;
    for (int a = spec.dim() - 1; a >= 0; --a)
        k = k * static_cast<std::size_t>(spec.resolution[a]) +
            static_cast<std::size_t>(idx[a]);
    return k;
}

double& GridDensity::at(std::span<const int> idx) {
    return cells[flat_index(spec, idx)];
}

double GridDensity::at(std::span<const int> idx) const {
    return cells[flat_index(spec, idx)];
}

double GridDensity::value_at(std::span<const double> p) const {
    std::size_t k = 0;
    for (int a = dim() - 1; a >= 0; --a) {
        const double t = (p[a] - spec.domain.lower[a]) / spec.cell_width(a);
        if (t < 0.0) return 0.0;
        const int i = static_cast<int>(t);
        if (i >= spec.resolution[a]) return 0.0;
        k = k * static_cast<std::size_t>(spec.resolution[a]) +
            static_cast<std::size_t>(i);
    }
    return cells[k];
}

bool GridDensity::same_spec(const GridDensity& other) const {
    return spec.resolution == other.spec.resolution &&
           spec.domain.lower == other.spec.domain.lower &&
           spec.domain.upper == other.spec.domain.upper;
}

void GridDensity::validate() const {
    for (double v : cells)
        if (v < 0.0 || !std::isfinite(v))
            throw std::invalid_argument("grid: negative or non-finite cell");
}

double total_mass(const DiscreteMeasure& mu) {
    std::vector<double> m(mu.atoms.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = mu.atoms[i].mass;
    return par::pairwise_sum(m);
}

double total_mass(const GridDensity& f) {
    return par::pairwise_sum(f.cells) * f.spec.cell_volume();
}

DiscreteMeasure dilate(const DiscreteMeasure& mu, double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("dilate: lambda must be > 0");
    DiscreteMeasure out = mu;
    for (Atom& a : out.atoms)
        for (double& x : a.position) x *= lambda;
    return out;
}

DiscreteMeasure scale_mass(const DiscreteMeasure& mu, double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("scale_mass: lambda must be > 0");
    DiscreteMeasure out = mu;
    for (Atom& a : out.atoms) a.mass *= lambda;
    return out;
}

GridDensity scale_mass(const GridDensity& f, double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("scale_mass: lambda must be > 0");
    GridDensity out = f;
    for (double& v : out.cells) v *= lambda;
    return out;
}

DiscreteMeasure add(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim != b.dim)
        throw std::invalid_argument("add: dimension mismatch");
    DiscreteMeasure out = a;
    out.atoms.insert(out.atoms.end(), b.atoms.begin(), b.atoms.end());
    return out;
}

GridDensity add(const GridDensity& a, const GridDensity& b) {
    if (!a.same_spec(b)) throw std::invalid_argument("add: grid spec mismatch");
    GridDensity out = a;
    for (std::size_t i = 0; i < out.cells.size(); ++i)
        out.cells[i] += b.cells[i];
    return out;
}

// (1 - (r/R)^2)^2 inside radius R, 0 outside.
static double bump(double r, double radius) {
    const double t = r / radius;
    if (t >= 1.0) return 0.0;
    const double s = 1.0 - t * t;
    return s * s;
}

GridDensity rasterize(const DiscreteMeasure& mu, const GridSpec& grid,
                      double radius) {
    grid.validate();
    if (grid.dim() != mu.dim)
        throw std::invalid_argument("rasterize: grid/measure dimension mismatch");
    if (!(radius >= 2.0 * grid.max_cell_width()))
        throw std::invalid_argument("rasterize: radius too small for resolution");

    const int d = grid.dim();
    GridDensity out(grid, 0.0);
    const double cell_vol = grid.cell_volume();

    for (const Atom& atom : mu.atoms) {
        for (int a = 0; a < d; ++a) {
            if (atom.position[a] < grid.domain.lower[a] - radius ||
                atom.position[a] > grid.domain.upper[a] + radius)
                throw std::invalid_argument("rasterize: atom outside domain");
        }
        // Cell index window covering the bump support, clipped to the grid.
        std::vector<int> lo(d), hi(d), idx(d);
        for (int a = 0; a < d; ++a) {
            const double w = grid.cell_width(a);
            lo[a] = std::max(
                0, static_cast<int>(std::floor(
                       (atom.position[a] - radius - grid.domain.lower[a]) / w)));
            hi[a] = std::min(
                grid.resolution[a] - 1,
                static_cast<int>(std::floor(
                    (atom.position[a] + radius - grid.domain.lower[a]) / w)));
            if (lo[a] > hi[a])
                throw std::invalid_argument("rasterize: atom outside domain");
            idx[a] = lo[a];
        }
        // First pass: un-normalized weights and their total.
        std::vector<std::pair<std::size_t, double>> weights;
        double weight_sum = 0.0;
        while (true) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double dx = grid.center(a, idx[a]) - atom.position[a];
                r2 += dx * dx;
            }
            const double w = bump(std::sqrt(r2), radius);
            if (w > 0.0) {
                weights.emplace_back(flat_index(grid, idx), w);
                weight_sum += w;
            }
            int a = 0;
            for (; a < d; ++a) {
                if (++idx[a] <= hi[a]) break;
                idx[a] = lo[a];
            }
            if (a == d) break;
        }
        if (!(weight_sum > 0.0))
            throw std::invalid_argument("rasterize: atom outside domain");
        // Second pass: deposit exactly atom.mass after clipping.
        const double scale = atom.mass / (weight_sum * cell_vol);
        for (const auto& [k, w] : weights) out.cells[k] += w * scale;
    }
    return out;
}

}  // namespace treeshape
