#pragma once

#include <cstdint>
#include <vector>

#include "treeshape/measure.hpp"

namespace treeshape {

enum class BoundaryKind : std::uint8_t { Neumann = 1, Dirichlet = 2 };

// Node-centered 2-D grid on a box: nodes at lower + i*h, boundary nodes
// flagged with their condition. A node on a Dirichlet side is Dirichlet even
// where sides of different kinds meet.
struct DomainGrid2D {
    BoxDomain box;
    int nx = 0, ny = 0;
    double hx = 0.0, hy = 0.0;
    std::vector<std::uint8_t> node_bc;  // 0 = interior, else BoundaryKind

    DomainGrid2D() = default;
    DomainGrid2D(BoxDomain b, int nx, int ny, BoundaryKind bc);
    // Per-side conditions: x_lo, x_hi, y_lo, y_hi.
    DomainGrid2D(BoxDomain b, int nx, int ny, BoundaryKind x_lo,
                 BoundaryKind x_hi, BoundaryKind y_lo, BoundaryKind y_hi);

    std::size_t nodes() const { return std::size_t(nx) * std::size_t(ny); }
    std::size_t index(int ix, int iy) const {
        return std::size_t(iy) * nx + ix;
    }
    double x(int ix) const { return box.lower[0] + ix * hx; }
    double y(int iy) const { return box.lower[1] + iy * hy; }
    // Trapezoidal quadrature weight of a node (1, 1/2 or 1/4 of hx*hy).
    double quad_weight(int ix, int iy) const;
    bool is_dirichlet(std::size_t i) const {
        return node_bc[i] == static_cast<std::uint8_t>(BoundaryKind::Dirichlet);
    }
};

// Reaction f(x,u) = a(x) - b*u with 0 <= a <= b*M, so u = 0 is a subsolution
// and u = M a supersolution.
struct ReactionSpec {
    std::vector<double> a;  // per node
    double b = 1.0;
    double M = 1.0;
    double K = 0.0;  // sup |f| over [0,M], computed on construction

    ReactionSpec() = default;
    ReactionSpec(std::vector<double> a_field, double b, double M);
    static ReactionSpec constant(const DomainGrid2D& grid, double a, double b,
                                 double M);
    double f(std::size_t node, double u) const { return a[node] - b * u; }
};

// Absolutely continuous part of the measure coefficient, as node values.
struct MeasureCoefficient {
    std::vector<double> node_vals;

    MeasureCoefficient() = default;
    static MeasureCoefficient zero(const DomainGrid2D& grid);
    static MeasureCoefficient constant(const DomainGrid2D& grid, double h);
    // Samples a cell density at the node positions. When renormalize is set,
    // the node field is scaled so its trapezoidal mass matches the grid's
    // total mass (keeps the M*kappa0 payoff bound exact).
    static MeasureCoefficient from_grid_density(const DomainGrid2D& grid,
                                                const GridDensity& f,
                                                bool renormalize = true);
    // Trapezoidal mass of the node field.
    double total_mass(const DomainGrid2D& grid) const;
};

struct HarvestSolution {
    std::vector<double> u;
    BoundaryKind bc = BoundaryKind::Neumann;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> step_norms;  // max |u^{k+1} - u^k| per outer step
    double max_increase = 0.0;       // worst pointwise rise between iterates
};

// Solves  laplace(u) + f(x,u) - h(x) u = 0  by monotone iteration from the
// supersolution u = M: each step solves (laplace - L) v = -f(u) + (h - L) u
// with L = b + max h, an M-matrix, via conjugate gradients. Iterates descend
// pointwise from M and stay in [0, M]. Throws SolverError when the residual
// tolerance is not met within max_iter outer steps.
//
// A solve is single-threaded (the outer iteration is stateful); independent
// instances can run concurrently since all inputs are immutable.
HarvestSolution solve(const DomainGrid2D& grid, const ReactionSpec& reaction,
                      const MeasureCoefficient& mu, BoundaryKind bc,
                      double tol = 1e-8, int max_iter = 200);

// HF integral form: sum of u * h over the nodes (trapezoidal).
double harvest_value(const DomainGrid2D& grid, const HarvestSolution& sol,
                     const MeasureCoefficient& mu);

// Flux form: integral of f(x,u); plus the outward boundary flux (one-sided
// differences) on Dirichlet sides.
double harvest_flux_form(const DomainGrid2D& grid, const HarvestSolution& sol,
                         const ReactionSpec& reaction);

struct ComparisonReport {
    double max_violation = 0.0;  // max over nodes of u_big - u_small
    bool passed = false;
};

// Solves with both coefficients (mu_small <= mu_big nodewise required) and
// checks the comparison principle u_big <= u_small + 10*tol.
ComparisonReport verify_comparison(const DomainGrid2D& grid,
                                   const ReactionSpec& reaction,
                                   const MeasureCoefficient& mu_small,
                                   const MeasureCoefficient& mu_big,
                                   BoundaryKind bc, double tol = 1e-8);

// Bilinear interpolation of the node field at a point (clamped to the box).
double interpolate(const DomainGrid2D& grid, const std::vector<double>& field,
                   std::span<const double> p);

}  // namespace treeshape
