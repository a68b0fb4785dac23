// Acceptance suite: runs every criterion end to end and prints one line per
// criterion. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "treeshape/harvest.hpp"
#include "treeshape/irrigation.hpp"
#include "treeshape/scenario.hpp"
#include "treeshape/shape_optimizer.hpp"
#include "treeshape/sunlight.hpp"
#include "treeshape/testing.hpp"

using namespace treeshape;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

// Every irrigation call in this suite goes through here, so the lower bound
// is checked on each of them (criterion 5 requires "never violated").
long g_irrigation_calls = 0;
long g_lower_bound_violations = 0;

IrrigationResult checked_irrigation(const DiscreteMeasure& mu, double alpha,
                                    const IrrigationOptions& opts = {}) {
    const IrrigationResult r = irrigation_cost(mu, alpha, opts);
    ++g_irrigation_calls;
    if (r.cost < lower_bound(mu, alpha) - 1e-9) ++g_lower_bound_violations;
    return r;
}

char buffer[256];

bool criterion1(std::string& detail) {
    const GridSpec spec{BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, {64, 64}};
    const GridDensity f(spec, 1.0), g(spec, 1.0);
    const Direction down(Point{0.0, -1.0});
    const double s = sunlight_directional(f, down);
    const double s_obs = sunlight_with_obstacle(f, g, down);
    const double want_free = 1.0 - std::exp(-1.0);
    const double want_obs = 0.5 * (1.0 - std::exp(-2.0));
    std::snprintf(buffer, sizeof(buffer),
                  "S=%.6f (want %.6f), S_obs=%.6f (want %.6f)", s, want_free,
                  s_obs, want_obs);
    detail = buffer;
    return std::abs(s - want_free) <= 1e-3 && std::abs(s_obs - want_obs) <= 1e-3;
}

bool criterion2(std::string& detail) {
    std::mt19937_64 rng(1001);
    int checked = 0;
    for (int i = 0; i < 50; ++i) {
        const GridDensity f = testing::random_blocks_field(rng, 64);
        const Direction n = testing::random_direction2(rng);
        const double s = sunlight_directional(f, n);
        const double mass = total_mass(f);

        if (!(s <= mass + 1e-6)) return false;  // mass bound

        const GridDensity f2 = testing::random_blocks_field(rng, 64);
        const double s2 = sunlight_directional(f2, n);
        const double s12 = sunlight_directional(add(f, f2), n);
        if (!(s12 >= s - 1e-6 && s12 <= s + s2 + 1e-6)) return false;  // monotone + subadditive

        const double lam = 1.0 + 3.0 * testing::uniform(rng, 0.0, 1.0);
        if (!(sunlight_directional(scale_mass(f, lam), n) <= lam * s + 1e-6))
            return false;  // sublinear mass scaling

        // Shadow bound on a ball-supported field.
        double r = 0.0;
        const GridDensity ball = testing::random_ball_field(rng, 96, r);
        if (!(sunlight_directional(ball, testing::random_direction2(rng)) <=
              ball_volume(1) * r * 1.02))
            return false;

        // Dilation scaling identity on commensurate grids.
        const double dl = testing::uniform(rng, 0.5, 2.0);
        GridSpec spec = f.spec;
        for (int a = 0; a < 2; ++a) {
            spec.domain.lower[a] *= dl;
            spec.domain.upper[a] *= dl;
        }
        GridDensity dilated(spec, 0.0);
        for (std::size_t k = 0; k < f.cells.size(); ++k)
            dilated.cells[k] = f.cells[k] / dl;
        const double lhs = sunlight_directional(dilated, n);
        if (!(std::abs(lhs - dl * s) <= 0.01 * std::max(1.0, dl * s)))
            return false;

        // Small-mass limit, monotone approach.
        double prev = -1.0;
        for (double lam2 : {1e-1, 1e-2, 1e-3}) {
            const double ratio =
                sunlight_directional(scale_mass(f, lam2), n) / lam2;
            if (ratio < prev - 1e-9) return false;
            prev = ratio;
        }
        if (std::abs(prev - mass) > 0.02 * mass) return false;
        ++checked;
    }
    std::snprintf(buffer, sizeof(buffer), "%d instances x 6 properties",
                  checked);
    detail = buffer;
    return checked == 50;
}

bool criterion3(std::string& detail) {
    std::mt19937_64 rng(1002);
    int checked = 0;
    for (int i = 0; i < 50; ++i) {
        const GridDensity f1 = testing::random_blocks_field(rng, 48);
        const GridDensity f2 = testing::random_blocks_field(rng, 48);
        const GridDensity g = testing::random_blocks_field(rng, 48, 2);
        const Direction n = testing::random_direction2(rng);
        const double sg1 = sunlight_with_obstacle(f1, g, n);
        if (!(sg1 <= sunlight_directional(f1, n) + 1e-6)) return false;
        const double sg12 = sunlight_with_obstacle(add(f1, f2), g, n);
        if (!(sg12 >= sg1 - 1e-6)) return false;
        if (!(sg12 <= sg1 + total_mass(f2) + 1e-6)) return false;
        ++checked;
    }
    std::snprintf(buffer, sizeof(buffer), "%d randomized pairs", checked);
    detail = buffer;
    return checked == 50;
}

bool criterion4(std::string& detail) {
    std::mt19937_64 rng(1003);
    for (int i = 0; i < 20; ++i) {
        const DiscreteMeasure mu = testing::random_measure(rng, 2, 1, 5, 1.0);
        const double cost = checked_irrigation(mu, 1.0).cost;
        double straight = 0.0;
        for (const Atom& a : mu.atoms) straight += a.mass * norm(a.position);
        if (std::abs(cost - straight) > 1e-6) return false;
    }

    // Two-atom fixture against a brute-force steiner grid search.
    const DiscreteMeasure pair(2,
                               {Atom{{1.0, 0.5}, 0.5}, Atom{{1.0, -0.5}, 0.5}});
    const IrrigationResult r = checked_irrigation(pair, 0.5);
    const double w = std::pow(0.5, 0.5);
    Point best{0.0, 0.0};
    double best_cost = 1e99;
    for (double x = 0.0; x <= 1.2 + 1e-12; x += 1e-3) {
        for (double y = -0.6; y <= 0.6 + 1e-12; y += 1e-3) {
            const double c = std::hypot(x, y) +
                             w * std::hypot(1.0 - x, 0.5 - y) +
                             w * std::hypot(1.0 - x, -0.5 - y);
            if (c < best_cost) {
                best_cost = c;
                best = {x, y};
            }
        }
    }
    Point steiner;
    for (const TreeNode& nd : r.tree.tree.nodes)
        if (nd.kind == NodeKind::Steiner) steiner = nd.pos;
    std::snprintf(buffer, sizeof(buffer),
                  "cost=%.6f (oracle %.6f), steiner=(%.4f,%.4f)", r.cost,
                  best_cost, steiner[0], steiner[1]);
    detail = buffer;
    return std::abs(r.cost - 1.5) <= 1e-4 &&
           std::abs(r.cost - best_cost) <= 1e-4 &&
           dist(steiner, Point{0.5, 0.0}) <= 1e-3 && dist(steiner, best) <= 2e-3;
}

bool criterion5(std::string& detail) {
    std::mt19937_64 rng(1004);
    for (int i = 0; i < 20; ++i) {
        const DiscreteMeasure m1 = testing::random_measure(rng, 2, 1, 3, 1.0);
        const DiscreteMeasure m2 = testing::random_measure(rng, 2, 1, 3, 1.0);
        const double alpha = testing::uniform(rng, 0.4, 1.0);
        const double c1 = checked_irrigation(m1, alpha).cost;
        const double c2 = checked_irrigation(m2, alpha).cost;
        const double c12 = checked_irrigation(add(m1, m2), alpha).cost;
        if (!(c12 >= c1 - 1e-6 && c12 <= c1 + c2 + 1e-6)) return false;
    }
    std::snprintf(buffer, sizeof(buffer),
                  "20 pairs; lower bound held on %ld/%ld calls so far",
                  g_irrigation_calls - g_lower_bound_violations,
                  g_irrigation_calls);
    detail = buffer;
    return g_lower_bound_violations == 0;
}

bool criterion6(std::string& detail) {
    const double tol = 1e-9;
    const DomainGrid2D grid(BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, 33, 33,
                            BoundaryKind::Neumann);
    const ReactionSpec reaction = ReactionSpec::constant(grid, 1.0, 1.0, 1.0);
    const MeasureCoefficient mc = MeasureCoefficient::constant(grid, 1.0);
    const HarvestSolution sol =
        solve(grid, reaction, mc, BoundaryKind::Neumann, tol, 200);
    for (double u : sol.u)
        if (std::abs(u - 0.5) > tol * 10) return false;
    const double h = harvest_value(grid, sol, mc);
    if (std::abs(h - 0.5) > 10 * tol) return false;

    // Dirichlet strip versus the cosh closed form, second-order convergence.
    auto strip_error = [](int nx) {
        const DomainGrid2D g(BoxDomain{{0.0, 0.0}, {1.0, 0.25}}, nx, 9,
                             BoundaryKind::Dirichlet, BoundaryKind::Dirichlet,
                             BoundaryKind::Neumann, BoundaryKind::Neumann);
        const ReactionSpec r = ReactionSpec::constant(g, 1.0, 1.0, 1.0);
        const HarvestSolution s = solve(g, r, MeasureCoefficient::zero(g),
                                        BoundaryKind::Dirichlet, 1e-10, 400);
        double err = 0.0;
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double exact =
                    1.0 - std::cosh(g.x(ix) - 0.5) / std::cosh(0.5);
                err = std::max(err, std::abs(s.u[g.index(ix, iy)] - exact));
            }
        return err;
    };
    const double e1 = strip_error(17);
    const double e2 = strip_error(33);
    const double ratio = e1 / e2;
    std::snprintf(buffer, sizeof(buffer),
                  "H=%.9f, strip errors %.3e -> %.3e (ratio %.2f)", h, e1, e2,
                  ratio);
    detail = buffer;
    return ratio >= 3.5 && ratio <= 4.5;
}

bool criterion7(std::string& detail) {
    std::mt19937_64 rng(1005);
    const DomainGrid2D grid(BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, 25, 25,
                            BoundaryKind::Neumann);
    const ReactionSpec reaction = ReactionSpec::constant(grid, 0.8, 1.0, 1.0);
    const double tol = 1e-9;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> h(grid.nodes());
        for (double& v : h) v = testing::uniform(rng, 0.0, 2.5);
        MeasureCoefficient mc;
        mc.node_vals = h;
        const HarvestSolution sol =
            solve(grid, reaction, mc, BoundaryKind::Neumann, tol, 400);
        const double h1 = harvest_value(grid, sol, mc);
        const double h2 = harvest_flux_form(grid, sol, reaction);
        if (std::abs(h1 - h2) > 10 * tol) return false;
    }
    for (int i = 0; i < 20; ++i) {
        std::vector<double> h(grid.nodes());
        for (double& v : h) v = testing::uniform(rng, 0.0, 2.0);
        MeasureCoefficient big, small;
        big.node_vals = h;
        small.node_vals = h;
        const double shrink = testing::uniform(rng, 0.0, 1.0);
        for (double& v : small.node_vals) v *= shrink;
        if (!verify_comparison(grid, reaction, small, big,
                               BoundaryKind::Neumann, 1e-8)
                 .passed)
            return false;
    }
    detail = "10 flux-form identities, 20 ordered pairs";
    return true;
}

bool criterion8(std::string& detail) {
    BranchProblem p;
    p.omega = BoxDomain{{-1.0, -1.0}, {1.0, 1.0}};
    p.grid = GridSpec{p.omega, {48, 48}};
    p.smear_radius = 0.1;
    p.eta = hemisphere_intensity(2, 4);
    p.c = 1.0;
    p.alpha = 0.75;
    p.kappa0 = 1.0;
    p.max_atoms = 12;

    const AnnealOptions opts{2000, 424242};
    const OptReport a = optimize_branches(p, opts);
    const OptReport b = optimize_branches(p, opts);
    if (report_to_json(a).dump() != report_to_json(b).dump()) {
        detail = "same-seed runs differ";
        return false;
    }

    const double r0 = support_radius(p.kappa0, p.alpha, p.c, p.eta);
    for (const Atom& atom : a.best.mu.atoms)
        if (norm(atom.position) > r0 + 1e-12 ||
            !p.omega.contains(atom.position)) {
            detail = "support constraint violated";
            return false;
        }
    // Best-so-far dominates every evaluated candidate, so bounding the trace
    // maximum covers the whole run.
    const double bound = p.eta.total_weight() * p.kappa0 + 1e-6;
    for (double t : a.trace)
        if (t > bound) {
            detail = "objective exceeded the eta*kappa0 bound";
            return false;
        }
    if (std::abs(total_mass(a.best.mu) - p.kappa0) > 1e-9) {
        detail = "mass budget violated";
        return false;
    }

    // Huge transport cost: the best measure collapses onto the origin.
    BranchProblem pc = p;
    pc.c = 1e6;
    const OptReport collapse = optimize_branches(pc, {400, 99});
    for (const Atom& atom : collapse.best.mu.atoms)
        if (norm(atom.position) > 1e-3) {
            detail = "collapse run kept a distant atom";
            return false;
        }
    const OptReport origin_only = optimize_branches(pc, {1, 99});
    if (collapse.best.objective < origin_only.best.objective - 1e-12) {
        detail = "collapse run lost to the origin candidate";
        return false;
    }
    std::snprintf(buffer, sizeof(buffer),
                  "best objective %.4f (bound %.4f), %ld evals, collapse "
                  "radius %.2e",
                  a.best.objective, bound, a.evaluations,
                  collapse.best.mu.atoms.empty()
                      ? 0.0
                      : norm(collapse.best.mu.atoms[0].position));
    detail = buffer;
    return true;
}

bool criterion9(std::string& detail) {
    RootProblem p;
    p.domain = DomainGrid2D(BoxDomain{{-1.0, -1.0}, {1.0, 1.0}}, 25, 25,
                            BoundaryKind::Neumann);
    p.reaction = ReactionSpec::constant(p.domain, 1.0, 1.0, 1.0);
    p.bc = BoundaryKind::Neumann;
    p.grid = GridSpec{p.domain.box, {25, 25}};
    p.smear_radius = 0.25;
    p.c = 0.2;
    p.alpha = 0.75;
    p.kappa0 = 1.0;
    p.max_atoms = 6;

    const OptReport rep = optimize_roots(p, {150, 7});
    if (rep.certificates.size() != rep.best.mu.atoms.size()) {
        detail = "certificate list incomplete";
        return false;
    }
    if (rep.best.objective > p.reaction.M * p.kappa0) {
        detail = "objective exceeded M*kappa0";
        return false;
    }
    int passed = 0;
    for (const AtomCertificate& c : rep.certificates) passed += c.passed;
    std::snprintf(buffer, sizeof(buffer),
                  "necessary condition: %d/%zu atoms pass (reported, not "
                  "asserted), objective %.4f <= %.1f",
                  passed, rep.certificates.size(), rep.best.objective,
                  p.reaction.M * p.kappa0);
    detail = buffer;
    return true;  // failures are reported, not asserted (heuristic search)
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "sunlight closed forms (free and obstacle)", criterion1},
        {2, "sunlight property suite, 50 randomized instances", criterion2},
        {3, "obstacle sunlight suite, 50 randomized pairs", criterion3},
        {4, "irrigation exactness (alpha=1, steiner fixture)", criterion4},
        {5, "irrigation lower bound and subadditivity", criterion5},
        {6, "harvest oracles (constant, cosh strip convergence)", criterion6},
        {7, "harvest flux-form identity and comparison principle", criterion7},
        {8, "optimizer sanity (collapse, bounds, determinism)", criterion8},
        {9, "root certificates reported", criterion9},
    };

    int failures = 0;
    for (Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
                    c.id, c.name.c_str(), secs, detail.empty() ? "" : " -- ",
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
    return failures;
}
