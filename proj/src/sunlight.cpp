#include "treeshape/sunlight.hpp"

#include <algorithm>
#include <cmath>

#include "treeshape/parallel.hpp"

namespace treeshape {

Direction::Direction(Point v) : n(std::move(v)) {
    if (n.size() < 2 || !all_finite(n))
        throw std::invalid_argument("direction: need a finite vector, d >= 2");
    const double len = norm(n);
    if (!(len > 0.0))
        throw std::invalid_argument("direction: zero vector");
    for (double& x : n) x /= len;
}

Direction Direction::from_angle(double theta) {
    return Direction(Point{std::cos(theta), std::sin(theta)});
}

void Direction::validate() const {
    if (std::abs(norm(n) - 1.0) > 1e-12)
        throw std::invalid_argument("direction: not unit length");
}

double ProjectionPlane::pixel_area() const {
    double a = 1.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) a *= pixel_width;
    return a;
}

std::size_t ProjectionPlane::pixel_count() const {
    std::size_t n = 1;
    for (int p : pixels) n *= static_cast<std::size_t>(p);
    return n;
}

void ProjectionPlane::validate() const {
    direction.validate();
    const int d = direction.dim();
    if (static_cast<int>(basis.size()) != d - 1)
        throw std::invalid_argument("plane: basis must have d-1 vectors");
    for (int i = 0; i < d - 1; ++i) {
        if (std::abs(norm(basis[i]) - 1.0) > 1e-12)
            throw std::invalid_argument("plane: basis vector not unit");
        if (std::abs(dot(basis[i], direction.n)) > 1e-12)
            throw std::invalid_argument("plane: basis not orthogonal to n");
        for (int j = i + 1; j < d - 1; ++j)
            if (std::abs(dot(basis[i], basis[j])) > 1e-12)
                throw std::invalid_argument("plane: basis not orthogonal");
    }
    if (!(pixel_width > 0.0))
        throw std::invalid_argument("plane: pixel width must be > 0");
}

double IntensityModel::total_weight() const {
    double s = 0.0;
    for (const auto& [n, w] : directions) s += w;
    return s;
}

void IntensityModel::validate() const {
    if (directions.empty())
        throw std::invalid_argument("intensity: empty direction list");
    for (const auto& [n, w] : directions) {
        n.validate();
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("intensity: weights must be > 0");
    }
}

namespace {

std::vector<Point> orthonormal_complement(const Point& n) {
    const int d = static_cast<int>(n.size());
    std::vector<Point> basis;
    if (d == 2) {
        basis.push_back(Point{-n[1], n[0]});
        return basis;
    }
    if (d == 3) {
        int least = 0;
        for (int a = 1; a < 3; ++a)
            if (std::abs(n[a]) < std::abs(n[least])) least = a;
        Point e(3, 0.0);
        e[least] = 1.0;
        Point b1(3);
        const double p = dot(e, n);
        for (int a = 0; a < 3; ++a) b1[a] = e[a] - p * n[a];
        const double len = norm(b1);
        for (double& x : b1) x /= len;
        Point b2{n[1] * b1[2] - n[2] * b1[1], n[2] * b1[0] - n[0] * b1[2],
                 n[0] * b1[1] - n[1] * b1[0]};
        basis.push_back(std::move(b1));
        basis.push_back(std::move(b2));
        return basis;
    }
    throw std::invalid_argument("projection: only d=2 and d=3 supported");
}

// Iterates the 2^d corners of a box.
template <typename Fn>
void for_each_corner(const BoxDomain& box, Fn&& fn) {
    const int d = box.dim();
    Point c(d);
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        for (int a = 0; a < d; ++a)
            c[a] = (mask >> a) & 1u ? box.upper[a] : box.lower[a];
        fn(c);
    }
}

// Flat lookup into a grid, piecewise constant per cell, 0 outside.
struct GridView {
    const double* cells;
    int d;
    double lo[3];
    double inv_w[3];
    int res[3];
    std::size_t stride[3];

    explicit GridView(const GridDensity& f) : cells(f.cells.data()), d(f.dim()) {
        std::size_t s = 1;
        for (int a = 0; a < d; ++a) {
            lo[a] = f.spec.domain.lower[a];
            inv_w[a] = 1.0 / f.spec.cell_width(a);
            res[a] = f.spec.resolution[a];
            stride[a] = s;
            s *= static_cast<std::size_t>(res[a]);
        }
    }

    double at(const double* p) const {
        std::size_t k = 0;
        for (int a = 0; a < d; ++a) {
            const double t = (p[a] - lo[a]) * inv_w[a];
            if (t < 0.0) return 0.0;
            const int i = static_cast<int>(t);
            if (i >= res[a]) return 0.0;
            k += stride[a] * static_cast<std::size_t>(i);
        }
        return cells[k];
    }
};

struct RaySetup {
    ProjectionPlane plane;
    double t_min = 0.0;
    int steps = 0;
    double step = 0.0;
};

RaySetup make_ray_setup(const GridDensity& f, const Direction& n,
                        double pixel_width) {
    if (f.cells.empty())
        throw std::invalid_argument("projection: degenerate grid");
    if (!(pixel_width > 0.0))
        throw std::invalid_argument("projection: pixel width must be > 0");
    if (n.dim() != f.dim())
        throw std::invalid_argument("projection: dimension mismatch");
    n.validate();

    RaySetup s;
    s.plane = make_projection_plane(f.spec, n, pixel_width);
    double t_lo = 0.0, t_hi = 0.0;
    bool first = true;
    for_each_corner(f.spec.domain, [&](const Point& c) {
        const double t = dot(c, n.n);
        if (first) {
            t_lo = t_hi = t;
            first = false;
        } else {
            t_lo = std::min(t_lo, t);
            t_hi = std::max(t_hi, t);
        }
    });
    const double max_step = 0.5 * f.spec.min_cell_width();
    s.steps = std::max(1, static_cast<int>(std::ceil((t_hi - t_lo) / max_step)));
    s.step = (t_hi - t_lo) / s.steps;
    s.t_min = t_lo;
    return s;
}

// World coordinates of the center of plane pixel `pix`.
void pixel_base(const RaySetup& s, std::size_t pix, double* base) {
    const int d = s.plane.direction.dim();
    const int paxes = d - 1;
    int idx[2] = {0, 0};
    std::size_t rem = pix;
    for (int a = 0; a < paxes; ++a) {
        idx[a] = static_cast<int>(rem % s.plane.pixels[a]);
        rem /= s.plane.pixels[a];
    }
    for (int c = 0; c < d; ++c) base[c] = 0.0;
    for (int a = 0; a < paxes; ++a) {
        const double y = s.plane.center(a, idx[a]);
        for (int c = 0; c < d; ++c) base[c] += y * s.plane.basis[a][c];
    }
}

// Midpoint line integral of f along the ray through one pixel.
double march_column(const GridView& g, const RaySetup& s, const double* base,
                    const double* nvec) {
    const int d = g.d;
    double acc = 0.0;
    for (int k = 0; k < s.steps; ++k) {
        const double t = s.t_min + (k + 0.5) * s.step;
        double p[3];
        for (int c = 0; c < d; ++c) p[c] = base[c] + t * nvec[c];
        acc += g.at(p);
    }
    return acc * s.step;
}

}  // namespace

ProjectionPlane make_projection_plane(const GridSpec& grid, const Direction& n,
                                      double pixel_width) {
    ProjectionPlane plane;
    plane.direction = n;
    plane.basis = orthonormal_complement(n.n);
    plane.pixel_width = pixel_width;
    const int paxes = n.dim() - 1;
    plane.lo.assign(paxes, 0.0);
    plane.pixels.assign(paxes, 0);
    for (int a = 0; a < paxes; ++a) {
        double y_lo = 0.0, y_hi = 0.0;
        bool first = true;
        for_each_corner(grid.domain, [&](const Point& c) {
            const double y = dot(c, plane.basis[a]);
            if (first) {
                y_lo = y_hi = y;
                first = false;
            } else {
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
            }
        });
        plane.lo[a] = y_lo - pixel_width;
        plane.pixels[a] = std::max(
            1, static_cast<int>(std::ceil((y_hi + pixel_width - plane.lo[a]) /
                                          pixel_width)));
    }
    return plane;
}

PlaneDensity project_density(const GridDensity& f, const Direction& n,
                             double pixel_width) {
    const RaySetup s = make_ray_setup(f, n, pixel_width);
    const GridView g(f);
    const int d = f.dim();
    double nvec[3] = {0, 0, 0};
    for (int c = 0; c < d; ++c) nvec[c] = n.n[c];

    PlaneDensity out;
    out.plane = s.plane;
    out.values.assign(s.plane.pixel_count(), 0.0);
    par::parallel_for(out.values.size(), [&](std::size_t pix) {
        double base[3];
        pixel_base(s, pix, base);
        out.values[pix] = march_column(g, s, base, nvec);
    });
    return out;
}

double sunlight_directional(const GridDensity& f, const Direction& n) {
    const PlaneDensity phi = project_density(f, n, f.spec.min_cell_width());
    std::vector<double> captured(phi.values.size());
    for (std::size_t i = 0; i < captured.size(); ++i)
        captured[i] = -std::expm1(-phi.values[i]);
    return par::pairwise_sum(captured) * phi.plane.pixel_area();
}

namespace {

// One column of the obstacle functional: backward sweep over the midpoint
// samples, integrating f * exp(-tail of f+g) exactly on each constant step.
double obstacle_column(const GridView& gf, const GridView& gg, const RaySetup& s,
                       const double* base, const double* nvec) {
    const int d = gf.d;
    const double h = s.step;
    double tail = 0.0;  // integral of f+g above the current sample
    double acc = 0.0;
    for (int k = s.steps - 1; k >= 0; --k) {
        const double t = s.t_min + (k + 0.5) * h;
        double p[3];
        for (int c = 0; c < d; ++c) p[c] = base[c] + t * nvec[c];
        const double fv = gf.at(p);
        const double cv = fv + gg.at(p);
        // integral over the step of exp(-(tail + c*(s_top - s))) ds
        const double seg = cv > 0.0 ? -std::expm1(-cv * h) / cv : h;
        acc += fv * std::exp(-tail) * seg;
        tail += cv * h;
    }
    return acc;
}

}  // namespace

double sunlight_with_obstacle(const GridDensity& f, const GridDensity& g,
                              const Direction& n) {
    if (!f.same_spec(g))
        throw std::invalid_argument("sunlight: obstacle grid spec mismatch");
    const RaySetup s = make_ray_setup(f, n, f.spec.min_cell_width());
    const GridView gf(f), gg(g);
    const int d = f.dim();
    double nvec[3] = {0, 0, 0};
    for (int c = 0; c < d; ++c) nvec[c] = n.n[c];

    std::vector<double> captured(s.plane.pixel_count());
    par::parallel_for(captured.size(), [&](std::size_t pix) {
        double base[3];
        pixel_base(s, pix, base);
        captured[pix] = obstacle_column(gf, gg, s, base, nvec);
    });
    return par::pairwise_sum(captured) * s.plane.pixel_area();
}

std::vector<double> sunlight_per_direction(const GridDensity& f,
                                           const IntensityModel& eta,
                                           const GridDensity* obstacle) {
    eta.validate();
    std::vector<double> per(eta.directions.size());
    for (std::size_t i = 0; i < per.size(); ++i) {
        const Direction& n = eta.directions[i].first;
        per[i] = obstacle ? sunlight_with_obstacle(f, *obstacle, n)
                          : sunlight_directional(f, n);
    }
    return per;
}

double sunlight_total(const GridDensity& f, const IntensityModel& eta,
                      const GridDensity* obstacle) {
    const std::vector<double> per = sunlight_per_direction(f, eta, obstacle);
    std::vector<double> weighted(per.size());
    for (std::size_t i = 0; i < per.size(); ++i)
        weighted[i] = eta.directions[i].second * per[i];
    return par::pairwise_sum(weighted);
}

IntensityModel hemisphere_intensity(int d, int count) {
    if (count < 1)
        throw std::invalid_argument("hemisphere: count must be >= 1");
    IntensityModel eta;
    const double half_sphere = sphere_surface(d) / 2.0;
    const double intensity = half_sphere;  // constant sigma_d/2 on {n_d > 0}
    const double weight = intensity * half_sphere / count;
    if (d == 2) {
        for (int j = 0; j < count; ++j) {
            const double theta = M_PI * (j + 0.5) / count;
            eta.directions.emplace_back(Direction::from_angle(theta), weight);
        }
    } else if (d == 3) {
        const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
        for (int j = 0; j < count; ++j) {
            const double z = (j + 0.5) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = 2.0 * M_PI * j / golden;
            eta.directions.emplace_back(
                Direction(Point{r * std::cos(phi), r * std::sin(phi), z}),
                weight);
        }
    } else {
        throw std::invalid_argument("hemisphere: only d=2 and d=3 supported");
    }
    return eta;
}

namespace reference {

PlaneDensity project_density(const GridDensity& f, const Direction& n,
                             double pixel_width) {
    const RaySetup s = make_ray_setup(f, n, pixel_width);
    const GridView g(f);
    const int d = f.dim();
    double nvec[3] = {0, 0, 0};
    for (int c = 0; c < d; ++c) nvec[c] = n.n[c];

    PlaneDensity out;
    out.plane = s.plane;
    out.values.assign(s.plane.pixel_count(), 0.0);
    for (std::size_t pix = 0; pix < out.values.size(); ++pix) {
        double base[3];
        pixel_base(s, pix, base);
        double acc = 0.0;
        for (int k = 0; k < s.steps; ++k) {
            const double t = s.t_min + (k + 0.5) * s.step;
            double p[3];
            for (int c = 0; c < d; ++c) p[c] = base[c] + t * nvec[c];
            acc += g.at(p);
        }
        out.values[pix] = acc * s.step;
    }
    return out;
}

double sunlight_directional(const GridDensity& f, const Direction& n) {
    const PlaneDensity phi =
        reference::project_density(f, n, f.spec.min_cell_width());
    double s = 0.0;
    for (double v : phi.values) s += -std::expm1(-v);
    return s * phi.plane.pixel_area();
}

double sunlight_with_obstacle(const GridDensity& f, const GridDensity& g,
                              const Direction& n) {
    if (!f.same_spec(g))
        throw std::invalid_argument("sunlight: obstacle grid spec mismatch");
    const RaySetup s = make_ray_setup(f, n, f.spec.min_cell_width());
    const GridView gf(f), gg(g);
    const int d = f.dim();
    double nvec[3] = {0, 0, 0};
    for (int c = 0; c < d; ++c) nvec[c] = n.n[c];
    double total = 0.0;
    for (std::size_t pix = 0; pix < s.plane.pixel_count(); ++pix) {
        double base[3];
        pixel_base(s, pix, base);
        total += obstacle_column(gf, gg, s, base, nvec);
    }
    return total * s.plane.pixel_area();
}

}  // namespace reference

}  // namespace treeshape
