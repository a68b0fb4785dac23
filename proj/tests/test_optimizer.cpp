#include <doctest.h>

#include <cmath>

#include "treeshape/shape_optimizer.hpp"

using namespace treeshape;

namespace {

BranchProblem small_branch_problem(double c, int hemi = 4) {
    BranchProblem p;
    p.omega = BoxDomain{{-1.0, -1.0}, {1.0, 1.0}};
    p.grid = GridSpec{p.omega, {40, 40}};
    p.smear_radius = 0.12;
    p.eta = hemisphere_intensity(2, hemi);
    p.c = c;
    p.alpha = 0.75;
    p.kappa0 = 1.0;
    p.max_atoms = 8;
    return p;
}

RootProblem small_root_problem(double a, double c) {
    RootProblem p;
    p.domain = DomainGrid2D(BoxDomain{{-1.0, -1.0}, {1.0, 1.0}}, 25, 25,
                            BoundaryKind::Neumann);
    p.reaction = ReactionSpec::constant(p.domain, a, 1.0, 1.0);
    p.bc = BoundaryKind::Neumann;
    p.grid = GridSpec{p.domain.box, {25, 25}};
    p.smear_radius = 0.2;
    p.c = c;
    p.alpha = 0.75;
    p.kappa0 = 1.0;
    p.max_atoms = 6;
    p.pde_tol = 1e-6;
    return p;
}

}  // namespace

TEST_CASE("support_radius: fixtures and monotonicity") {
    IntensityModel unit;
    unit.directions.emplace_back(Direction(Point{0.0, 1.0}), 1.0);
    CHECK(support_radius(1.0, 1.0, 2.0, unit) == doctest::Approx(0.5));

    CHECK(support_radius(1.0, 1.0, 2.0, 1.0) >
          support_radius(1.0, 1.0, 4.0, 1.0));

    const double r = support_radius(2.0, 0.5, 1.0, M_PI * M_PI);
    CHECK(r == doctest::Approx(std::sqrt(2.0) * M_PI * M_PI / 0.5).epsilon(1e-12));
    CHECK(r == doctest::Approx(27.9158).epsilon(1e-4));

    CHECK_THROWS_AS(support_radius(1.0, 0.5, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("problem validation") {
    BranchProblem p = small_branch_problem(1.0);
    CHECK_NOTHROW(p.validate());

    BranchProblem bad_alpha = p;
    bad_alpha.alpha = 0.0;
    CHECK_THROWS_AS(bad_alpha.validate(), std::invalid_argument);

    BranchProblem no_origin = p;
    no_origin.omega = BoxDomain{{1.0, 1.0}, {2.0, 2.0}};
    no_origin.grid = GridSpec{no_origin.omega, {40, 40}};
    CHECK_THROWS_AS(no_origin.validate(), std::invalid_argument);

    BranchProblem thin_smear = p;
    thin_smear.smear_radius = 0.01;
    CHECK_THROWS_AS(thin_smear.validate(), std::invalid_argument);

    // d = 3 tightens the exponent condition to alpha > 1/2.
    BranchProblem d3;
    d3.omega = BoxDomain{{-1, -1, -1}, {1, 1, 1}};
    d3.grid = GridSpec{d3.omega, {16, 16, 16}};
    d3.smear_radius = 0.3;
    d3.eta = hemisphere_intensity(3, 4);
    d3.alpha = 0.4;
    CHECK_THROWS_AS(d3.validate(), std::invalid_argument);
    d3.alpha = 0.75;
    CHECK_NOTHROW(d3.validate());
}

TEST_CASE("optimize_branches: budget 1 returns the initial candidate") {
    const BranchProblem p = small_branch_problem(1.0);
    const OptReport rep = optimize_branches(p, {1, 42});
    CHECK(rep.evaluations == 1);
    CHECK(rep.trace.size() == 1);
    CHECK(rep.best.mu.atoms.size() == 1);
    CHECK(norm(rep.best.mu.atoms[0].position) == 0.0);
    CHECK(rep.best.objective == rep.trace[0]);
}

TEST_CASE("optimize_branches: determinism, trace, budget, bounds") {
    const BranchProblem p = small_branch_problem(0.5);
    const OptReport a = optimize_branches(p, {120, 7});
    const OptReport b = optimize_branches(p, {120, 7});
    CHECK(a.trace == b.trace);
    CHECK(a.best.objective == b.best.objective);
    CHECK(a.evaluations == b.evaluations);

    const OptReport c = optimize_branches(p, {120, 8});
    CHECK((c.trace != a.trace));  // different seed explores differently

    CHECK(a.evaluations <= 120);
    for (std::size_t i = 1; i < a.trace.size(); ++i)
        CHECK(a.trace[i] >= a.trace[i - 1]);

    // Mass budget and the hard support constraint.
    CHECK(std::abs(total_mass(a.best.mu) - p.kappa0) <= 1e-9);
    const double r0 = support_radius(p.kappa0, p.alpha, p.c, p.eta);
    for (const Atom& atom : a.best.mu.atoms)
        CHECK(norm(atom.position) <= r0 + 1e-12);

    // Payoff bound: objective <= ||eta|| * kappa0.
    CHECK(a.best.objective <= p.eta.total_weight() * p.kappa0 + 1e-6);

    // Certificates attached and all passing (enforced constraint).
    CHECK(a.certificates.size() == a.best.mu.atoms.size());
    for (const AtomCertificate& cert : a.certificates) CHECK(cert.passed);
}

TEST_CASE("optimize_branches: huge transport cost pins mass at the origin") {
    BranchProblem p = small_branch_problem(1e6);
    const OptReport rep = optimize_branches(p, {150, 3});
    for (const Atom& atom : rep.best.mu.atoms)
        CHECK(norm(atom.position) <= 1e-3);
    // The origin candidate's objective is what the run must at least keep.
    const OptReport origin_only = optimize_branches(p, {1, 3});
    CHECK(rep.best.objective >= origin_only.best.objective - 1e-12);
}

TEST_CASE("optimize_roots: zero reaction keeps the payoff at zero") {
    const RootProblem p = small_root_problem(0.0, 1.0);
    const OptReport rep = optimize_roots(p, {40, 5});
    // u = 0 up to the solver tolerance, so nothing beats the initial
    // candidate by more than that.
    CHECK(rep.best.objective <= 10 * p.pde_tol);
    CHECK(rep.best.payoff <= 10 * p.pde_tol);
    CHECK(std::abs(total_mass(rep.best.mu) - p.kappa0) <= 1e-9);
}

TEST_CASE("optimize_roots: determinism and the M*kappa0 bound") {
    const RootProblem p = small_root_problem(1.0, 0.5);
    const OptReport a = optimize_roots(p, {60, 11});
    const OptReport b = optimize_roots(p, {60, 11});
    CHECK(a.trace == b.trace);
    CHECK(a.best.objective == b.best.objective);
    CHECK(a.best.objective <= p.reaction.M * p.kappa0);
    for (std::size_t i = 1; i < a.trace.size(); ++i)
        CHECK(a.trace[i] >= a.trace[i - 1]);
    CHECK(a.certificates.size() == a.best.mu.atoms.size());
}

TEST_CASE("optimize_roots: c=0 single atom drifts toward the payoff maximizer") {
    // With no transport cost and one atom, the objective is the harvest
    // payoff alone; sweep the atom over a coarse grid as the oracle.
    RootProblem p = small_root_problem(1.0, 1.0);
    p.c = 1e-9;  // problem requires c > 0; vanishing cost acts as c = 0
    p.max_atoms = 1;

    auto payoff_at = [&](double x, double y) {
        const DiscreteMeasure mu(2, {Atom{{x, y}, p.kappa0}});
        const GridDensity f = rasterize(mu, p.grid, p.smear_radius);
        const MeasureCoefficient mc =
            MeasureCoefficient::from_grid_density(p.domain, f);
        const HarvestSolution sol =
            solve(p.domain, p.reaction, mc, p.bc, p.pde_tol, p.pde_max_iter);
        return harvest_value(p.domain, sol, mc);
    };
    double oracle_best = -1e99;
    for (double x = -0.75; x <= 0.76; x += 0.25)
        for (double y = -0.75; y <= 0.76; y += 0.25)
            oracle_best = std::max(oracle_best, payoff_at(x, y));

    const OptReport rep = optimize_roots(p, {80, 2});
    CHECK(rep.best.mu.atoms.size() == 1);
    // The annealer should get within a few percent of the sweep's best.
    CHECK(rep.best.payoff >= 0.9 * oracle_best);
}

TEST_CASE("certify: root necessary condition reduces to u >= 0 at c -> 0") {
    RootProblem p = small_root_problem(1.0, 1.0);
    p.c = 1e-12;
    const OptReport rep = optimize_roots(p, {20, 9});
    const auto certs = certify(rep, p);
    for (const AtomCertificate& cert : certs) {
        CHECK(cert.threshold <= 1e-9);
        CHECK(cert.passed);  // u >= 0 always holds
    }
}
