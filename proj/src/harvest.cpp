#include "treeshape/harvest.hpp"

#include <algorithm>
#include <cmath>

#include "treeshape/parallel.hpp"

namespace treeshape {

namespace {

std::uint8_t flag(BoundaryKind k) { return static_cast<std::uint8_t>(k); }

}  // namespace

DomainGrid2D::DomainGrid2D(BoxDomain b, int nx_, int ny_, BoundaryKind bc)
    : DomainGrid2D(std::move(b), nx_, ny_, bc, bc, bc, bc) {}

DomainGrid2D::DomainGrid2D(BoxDomain b, int nx_, int ny_, BoundaryKind x_lo,
                           BoundaryKind x_hi, BoundaryKind y_lo,
                           BoundaryKind y_hi)
    : box(std::move(b)), nx(nx_), ny(ny_) {
    if (box.dim() != 2)
        throw std::invalid_argument("harvest: domain must be 2-D");
    if (nx < 3 || ny < 3)
        throw std::invalid_argument("harvest: need at least 3 nodes per axis");
    hx = box.extent(0) / (nx - 1);
    hy = box.extent(1) / (ny - 1);
    node_bc.assign(nodes(), 0);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            std::uint8_t f = 0;
            auto merge = [&](BoundaryKind k) {
                // Dirichlet wins where sides meet.
                if (f != flag(BoundaryKind::Dirichlet)) f = flag(k);
            };
            if (ix == 0) merge(x_lo);
            if (ix == nx - 1) merge(x_hi);
            if (iy == 0) merge(y_lo);
            if (iy == ny - 1) merge(y_hi);
            node_bc[index(ix, iy)] = f;
        }
    }
}

double DomainGrid2D::quad_weight(int ix, int iy) const {
    const double wx = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
    const double wy = (iy == 0 || iy == ny - 1) ? 0.5 : 1.0;
    return wx * wy * hx * hy;
}

ReactionSpec::ReactionSpec(std::vector<double> a_field, double b_, double M_)
    : a(std::move(a_field)), b(b_), M(M_) {
    if (!(b > 0.0) || !(M > 0.0))
        throw std::invalid_argument("reaction: b and M must be > 0");
    double a_min = a.empty() ? 0.0 : a[0];
    double a_max = a_min;
    for (double v : a) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("reaction: a(x) must be >= 0");
        a_min = std::min(a_min, v);
        a_max = std::max(a_max, v);
    }
    if (a_max > b * M)
        throw std::invalid_argument("reaction: a(x) <= b*M required");
    K = std::max(a_max, b * M - a_min);
}

ReactionSpec ReactionSpec::constant(const DomainGrid2D& grid, double a,
                                    double b, double M) {
    return ReactionSpec(std::vector<double>(grid.nodes(), a), b, M);
}

MeasureCoefficient MeasureCoefficient::zero(const DomainGrid2D& grid) {
    MeasureCoefficient mc;
    mc.node_vals.assign(grid.nodes(), 0.0);
    return mc;
}

MeasureCoefficient MeasureCoefficient::constant(const DomainGrid2D& grid,
                                                double h) {
    if (h < 0.0 || !std::isfinite(h))
        throw std::invalid_argument("coefficient: must be >= 0");
    MeasureCoefficient mc;
    mc.node_vals.assign(grid.nodes(), h);
    return mc;
}

MeasureCoefficient MeasureCoefficient::from_grid_density(
    const DomainGrid2D& grid, const GridDensity& f, bool renormalize) {
    if (f.dim() != 2)
        throw std::invalid_argument("coefficient: density must be 2-D");
    MeasureCoefficient mc;
    mc.node_vals.assign(grid.nodes(), 0.0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            // Nearest-cell sample, clamped so boundary nodes read the edge cell.
            std::size_t k = 0;
            const double p[2] = {grid.x(ix), grid.y(iy)};
            bool outside = false;
            for (int a = 1; a >= 0; --a) {
                const double w = f.spec.cell_width(a);
                int i = static_cast<int>(
                    std::floor((p[a] - f.spec.domain.lower[a]) / w));
                if (i < -1 || i > f.spec.resolution[a]) outside = true;
                i = std::clamp(i, 0, f.spec.resolution[a] - 1);
                k = k * static_cast<std::size_t>(f.spec.resolution[a]) +
                    static_cast<std::size_t>(i);
            }
            mc.node_vals[grid.index(ix, iy)] = outside ? 0.0 : f.cells[k];
        }
    }
    if (renormalize) {
        const double want = treeshape::total_mass(f);
        const double have = mc.total_mass(grid);
        if (have > 0.0 && want > 0.0) {
            const double s = want / have;
            for (double& v : mc.node_vals) v *= s;
        }
    }
    return mc;
}

double MeasureCoefficient::total_mass(const DomainGrid2D& grid) const {
    double s = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix)
            s += node_vals[grid.index(ix, iy)] * grid.quad_weight(ix, iy);
    return s;
}

namespace {

// Weighted 5-point operator  W * (-laplace + L) applied to v. Neumann
// boundary nodes use ghost reflection; Dirichlet nodes are pinned to zero.
// The trapezoidal weights make the matrix symmetric.
struct Operator {
    const DomainGrid2D& grid;
    double lambda;
    std::vector<double> weight;  // unitless trapezoid factor per node

    explicit Operator(const DomainGrid2D& g, double L) : grid(g), lambda(L) {
        weight.resize(g.nodes());
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                weight[g.index(ix, iy)] =
                    g.quad_weight(ix, iy) / (g.hx * g.hy);
    }

    // Unweighted (-laplace + L) at one node.
    double row(const std::vector<double>& v, int ix, int iy) const {
        const std::size_t i = grid.index(ix, iy);
        if (grid.is_dirichlet(i)) return v[i];
        const double inv_hx2 = 1.0 / (grid.hx * grid.hx);
        const double inv_hy2 = 1.0 / (grid.hy * grid.hy);
        const int xw = ix == 0 ? 1 : ix - 1;
        const int xe = ix == grid.nx - 1 ? grid.nx - 2 : ix + 1;
        const int ys = iy == 0 ? 1 : iy - 1;
        const int yn = iy == grid.ny - 1 ? grid.ny - 2 : iy + 1;
        const double lap =
            (v[grid.index(xe, iy)] - 2.0 * v[i] + v[grid.index(xw, iy)]) *
                inv_hx2 +
            (v[grid.index(ix, yn)] - 2.0 * v[i] + v[grid.index(ix, ys)]) *
                inv_hy2;
        return -lap + lambda * v[i];
    }

    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int ix = 0; ix < grid.nx; ++ix) {
                const std::size_t i = grid.index(ix, iy);
                out[i] = weight[i] * row(v, ix, iy);
            }
    }
};

double dot_det(const std::vector<double>& a, const std::vector<double>& b,
               std::vector<double>& scratch) {
    scratch.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) scratch[i] = a[i] * b[i];
    return par::pairwise_sum(scratch);
}

// Conjugate gradients on the weighted system; x is the initial guess.
// Returns the iteration count, or -1 when the budget runs out.
int conjugate_gradient(const Operator& op, const std::vector<double>& b,
                       std::vector<double>& x, double tol) {
    const std::size_t n = b.size();
    std::vector<double> r(n), p(n), Ap(n), scratch(n);
    op.apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    p = r;
    double rr = dot_det(r, r, scratch);
    const double threshold = tol * tol;
    const int max_iter = static_cast<int>(n) * 10 + 100;
    for (int it = 0; it < max_iter; ++it) {
        if (rr <= threshold) return it;
        op.apply(p, Ap);
        const double pAp = dot_det(p, Ap, scratch);
        if (!(pAp > 0.0)) return -1;
        const double alpha = rr / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        const double rr_new = dot_det(r, r, scratch);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return rr <= threshold ? max_iter : -1;
}

HarvestSolution solve_impl(const DomainGrid2D& grid,
                           const ReactionSpec& reaction,
                           const MeasureCoefficient& mu, BoundaryKind bc,
                           double tol, int max_iter) {
    if (reaction.a.size() != grid.nodes() ||
        mu.node_vals.size() != grid.nodes())
        throw std::invalid_argument("harvest: field size mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("harvest: tol must be > 0");
    for (double h : mu.node_vals)
        if (h < 0.0 || !std::isfinite(h))
            throw std::invalid_argument("harvest: coefficient must be >= 0");

    // Per-side grids keep their constructed flags; `bc` is recorded on the
    // solution and must match uniform grids.
    const DomainGrid2D& g = grid;

    double h_max = 0.0;
    for (double h : mu.node_vals) h_max = std::max(h_max, h);
    const double lambda = reaction.b + h_max;
    const Operator op(g, lambda);

    const std::size_t n = g.nodes();
    std::vector<double> u(n, reaction.M), rhs(n), v(n);
    for (std::size_t i = 0; i < n; ++i)
        if (g.is_dirichlet(i)) u[i] = 0.0;

    const double cg_tol = 0.01 * tol;
    double residual = 0.0;
    std::vector<double> step_norms;
    double max_increase = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        // Linear step: (-laplace + L) v = f(u) + (L - h) u, weighted.
        for (std::size_t i = 0; i < n; ++i) {
            if (g.is_dirichlet(i)) {
                rhs[i] = 0.0;
                continue;
            }
            rhs[i] = op.weight[i] * (reaction.f(i, u[i]) +
                                     (lambda - mu.node_vals[i]) * u[i]);
        }
        v = u;
        if (conjugate_gradient(op, rhs, v, cg_tol) < 0)
            throw SolverError("harvest: linear solve stalled", residual);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::clamp(v[i], 0.0, reaction.M);
            if (g.is_dirichlet(i)) v[i] = 0.0;
            max_diff = std::max(max_diff, std::abs(v[i] - u[i]));
            max_increase = std::max(max_increase, v[i] - u[i]);
        }
        step_norms.push_back(max_diff);
        u.swap(v);
        // Residual of the nonlinear equation in the max norm.
        residual = 0.0;
        for (int iy = 0; iy < g.ny; ++iy) {
            for (int ix = 0; ix < g.nx; ++ix) {
                const std::size_t i = g.index(ix, iy);
                if (g.is_dirichlet(i)) continue;
                const double r = -op.row(u, ix, iy) + lambda * u[i] +
                                 reaction.f(i, u[i]) - mu.node_vals[i] * u[i];
                residual = std::max(residual, std::abs(r));
            }
        }
        if (max_diff < tol && residual <= tol) {
            HarvestSolution sol;
            sol.u = std::move(u);
            sol.bc = bc;
            sol.residual = residual;
            sol.iterations = it;
            sol.step_norms = std::move(step_norms);
            sol.max_increase = max_increase;
            return sol;
        }
    }
    throw SolverError("harvest: no convergence within max_iter", residual);
}

}  // namespace

HarvestSolution solve(const DomainGrid2D& grid, const ReactionSpec& reaction,
                      const MeasureCoefficient& mu, BoundaryKind bc, double tol,
                      int max_iter) {
    return solve_impl(grid, reaction, mu, bc, tol, max_iter);
}

double harvest_value(const DomainGrid2D& grid, const HarvestSolution& sol,
                     const MeasureCoefficient& mu) {
    if (sol.u.size() != grid.nodes() || mu.node_vals.size() != grid.nodes())
        throw std::invalid_argument("harvest_value: grid mismatch");
    double s = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const std::size_t i = grid.index(ix, iy);
            s += sol.u[i] * mu.node_vals[i] * grid.quad_weight(ix, iy);
        }
    return s;
}

double harvest_flux_form(const DomainGrid2D& grid, const HarvestSolution& sol,
                         const ReactionSpec& reaction) {
    double s = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const std::size_t i = grid.index(ix, iy);
            s += reaction.f(i, sol.u[i]) * grid.quad_weight(ix, iy);
        }
    // Outward one-sided flux on Dirichlet sides (u = 0 there).
    auto line_w = [&](int i, int count, double h) {
        return (i == 0 || i == count - 1) ? 0.5 * h : h;
    };
    for (int iy = 0; iy < grid.ny; ++iy) {
        if (grid.is_dirichlet(grid.index(0, iy)))
            s += -sol.u[grid.index(1, iy)] / grid.hx * line_w(iy, grid.ny, grid.hy);
        if (grid.is_dirichlet(grid.index(grid.nx - 1, iy)))
            s += -sol.u[grid.index(grid.nx - 2, iy)] / grid.hx *
                 line_w(iy, grid.ny, grid.hy);
    }
    for (int ix = 0; ix < grid.nx; ++ix) {
        if (grid.is_dirichlet(grid.index(ix, 0)))
            s += -sol.u[grid.index(ix, 1)] / grid.hy * line_w(ix, grid.nx, grid.hx);
        if (grid.is_dirichlet(grid.index(ix, grid.ny - 1)))
            s += -sol.u[grid.index(ix, grid.ny - 2)] / grid.hy *
                 line_w(ix, grid.nx, grid.hx);
    }
    return s;
}

ComparisonReport verify_comparison(const DomainGrid2D& grid,
                                   const ReactionSpec& reaction,
                                   const MeasureCoefficient& mu_small,
                                   const MeasureCoefficient& mu_big,
                                   BoundaryKind bc, double tol) {
    for (std::size_t i = 0; i < mu_small.node_vals.size(); ++i)
        if (mu_small.node_vals[i] > mu_big.node_vals[i])
            throw std::invalid_argument(
                "comparison: mu_small <= mu_big required nodewise");
    const HarvestSolution a = solve(grid, reaction, mu_small, bc, tol);
    const HarvestSolution b = solve(grid, reaction, mu_big, bc, tol);
    ComparisonReport rep;
    for (std::size_t i = 0; i < a.u.size(); ++i)
        rep.max_violation = std::max(rep.max_violation, b.u[i] - a.u[i]);
    rep.passed = rep.max_violation <= 10.0 * tol;
    return rep;
}

double interpolate(const DomainGrid2D& grid, const std::vector<double>& field,
                   std::span<const double> p) {
    double sx = (p[0] - grid.box.lower[0]) / grid.hx;
    double sy = (p[1] - grid.box.lower[1]) / grid.hy;
    sx = std::clamp(sx, 0.0, static_cast<double>(grid.nx - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(grid.ny - 1));
    const int ix = std::min(static_cast<int>(sx), grid.nx - 2);
    const int iy = std::min(static_cast<int>(sy), grid.ny - 2);
    const double fx = sx - ix, fy = sy - iy;
    const double v00 = field[grid.index(ix, iy)];
    const double v10 = field[grid.index(ix + 1, iy)];
    const double v01 = field[grid.index(ix, iy + 1)];
    const double v11 = field[grid.index(ix + 1, iy + 1)];
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 +
           (1 - fx) * fy * v01 + fx * fy * v11;
}

}  // namespace treeshape
