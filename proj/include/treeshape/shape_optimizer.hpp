#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treeshape/harvest.hpp"
#include "treeshape/irrigation.hpp"
#include "treeshape/measure.hpp"
#include "treeshape/sunlight.hpp"

namespace treeshape {

// Branch problem: maximize sunlight minus c * irrigation cost over measures
// of mass kappa0 supported in closure(Omega), intersected with the a priori
// ball B(0, r0).
struct BranchProblem {
    BoxDomain omega;          // contains the origin in its closure
    IntensityModel eta;
    std::optional<GridDensity> obstacle;  // shares `grid`
    GridSpec grid;            // rasterization grid, domain must cover omega
    double smear_radius = 0.0;
    double c = 1.0;
    double alpha = 0.75;
    double kappa0 = 1.0;
    int max_atoms = 12;

    void validate() const;
};

// Root problem: maximize harvest minus c * irrigation cost; atoms confined
// to closure(Omega). d = 2.
struct RootProblem {
    DomainGrid2D domain;
    ReactionSpec reaction;
    BoundaryKind bc = BoundaryKind::Neumann;
    GridSpec grid;            // rasterization grid for the root density
    double smear_radius = 0.0;
    double c = 1.0;
    double alpha = 0.75;
    double kappa0 = 1.0;
    int max_atoms = 12;
    double pde_tol = 1e-6;
    // The monotone scheme contracts like maxh/(b+maxh); peaked rasterized
    // coefficients need a generous outer budget.
    int pde_max_iter = 1200;

    void validate() const;
};

struct Candidate {
    DiscreteMeasure mu;      // total mass kappa0 (within 1e-9)
    double payoff = 0.0;     // sunlight or harvest value
    double cost = 0.0;       // heuristic irrigation cost
    double objective = 0.0;  // payoff - c * cost
};

struct AtomCertificate {
    int atom = 0;
    double radius = 0.0;     // |x|
    double threshold = 0.0;  // bound the atom is checked against
    double value = 0.0;      // measured quantity (|x| or u(x))
    bool passed = false;
};

struct OptReport {
    Candidate best;
    std::vector<double> trace;  // best objective after each evaluation
    long evaluations = 0;
    long proposals = 0;
    long accepted = 0;
    long rejected_infeasible = 0;
    long pde_failures = 0;
    std::uint64_t seed = 0;
    double support_radius = 0.0;  // branches only; 0 for roots
    double smear_radius = 0.0;
    std::vector<AtomCertificate> certificates;
};

struct AnnealOptions {
    long budget = 1000;  // objective evaluations, including the initial one
    std::uint64_t seed = 0;
};

// r0 = kappa0^(1-alpha) * ||eta||_L1 / (c * alpha): maximizing sequences can
// be confined to B(0, r0).
double support_radius(double kappa0, double alpha, double c,
                      const IntensityModel& eta);
double support_radius(double kappa0, double alpha, double c, double eta_l1);

// Seed handed to the heuristic irrigation solver inside a run; exposed so
// post-run tooling can rebuild the same tree for a given measure.
std::uint64_t irrigation_seed(std::uint64_t run_seed);

OptReport optimize_branches(const BranchProblem& p, const AnnealOptions& opts);
OptReport optimize_roots(const RootProblem& p, const AnnealOptions& opts);

// Post-hoc certificates: branches check the hard support constraint; roots
// evaluate the solved water density u at each atom against the necessary
// condition u(x) >= c*alpha*kappa0^(alpha-1)*|x| - tol (reported, not
// enforced).
std::vector<AtomCertificate> certify(const OptReport& report,
                                     const BranchProblem& p);
std::vector<AtomCertificate> certify(const OptReport& report,
                                     const RootProblem& p,
                                     double tol = 1e-3);

}  // namespace treeshape
