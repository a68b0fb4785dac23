#include "treeshape/shape_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace treeshape {

double support_radius(double kappa0, double alpha, double c, double eta_l1) {
    if (!(c > 0.0) || !(alpha > 0.0) || alpha > 1.0 || !(kappa0 > 0.0))
        throw std::invalid_argument("support_radius: need c > 0, kappa0 > 0, alpha in (0,1]");
    return std::pow(kappa0, 1.0 - alpha) * eta_l1 / (c * alpha);
}

double support_radius(double kappa0, double alpha, double c,
                      const IntensityModel& eta) {
    return support_radius(kappa0, alpha, c, eta.total_weight());
}

std::uint64_t irrigation_seed(std::uint64_t run_seed) {
    return run_seed ^ 0x9e3779b97f4a7c15ULL;
}

void BranchProblem::validate() const {
    const int d = omega.dim();
    if (!(alpha > 1.0 - 1.0 / (d - 1)) || alpha > 1.0)
        throw std::invalid_argument(
            "branches: alpha must satisfy 1 - 1/(d-1) < alpha <= 1");
    Point origin(d, 0.0);
    if (!omega.contains(origin))
        throw std::invalid_argument("branches: origin must lie in closure(omega)");
    eta.validate();
    grid.validate();
    if (grid.dim() != d)
        throw std::invalid_argument("branches: grid dimension mismatch");
    for (int a = 0; a < d; ++a)
        if (grid.domain.lower[a] > omega.lower[a] ||
            grid.domain.upper[a] < omega.upper[a])
            throw std::invalid_argument("branches: grid domain must cover omega");
    if (!(smear_radius >= 2.0 * grid.max_cell_width()))
        throw std::invalid_argument(
            "branches: smear radius must be >= 2 cell widths");
    if (obstacle && !(obstacle->spec.resolution == grid.resolution &&
                      obstacle->spec.domain.lower == grid.domain.lower &&
                      obstacle->spec.domain.upper == grid.domain.upper))
        throw std::invalid_argument("branches: obstacle must share the grid");
    if (!(c > 0.0) || !(kappa0 > 0.0) || max_atoms < 1)
        throw std::invalid_argument("branches: need c > 0, kappa0 > 0, max_atoms >= 1");
}

void RootProblem::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("roots: alpha must be in (0, 1]");
    Point origin(2, 0.0);
    if (!domain.box.contains(origin))
        throw std::invalid_argument("roots: origin must lie in closure(domain)");
    grid.validate();
    if (grid.dim() != 2)
        throw std::invalid_argument("roots: grid must be 2-D");
    for (int a = 0; a < 2; ++a)
        if (grid.domain.lower[a] > domain.box.lower[a] ||
            grid.domain.upper[a] < domain.box.upper[a])
            throw std::invalid_argument("roots: grid domain must cover the domain");
    if (!(smear_radius >= 2.0 * grid.max_cell_width()))
        throw std::invalid_argument("roots: smear radius must be >= 2 cell widths");
    if (reaction.a.size() != domain.nodes())
        throw std::invalid_argument("roots: reaction field size mismatch");
    if (!(c > 0.0) || !(kappa0 > 0.0) || max_atoms < 1)
        throw std::invalid_argument("roots: need c > 0, kappa0 > 0, max_atoms >= 1");
}

namespace {

// Self-contained samplers so runs are reproducible across standard libraries.
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform01() {
        return std::ldexp(static_cast<double>(eng() >> 11), -53);
    }
    double normal() {
        const double u1 = std::max(uniform01(), 1e-300);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    std::size_t index(std::size_t n) { return eng() % n; }
};

struct AnnealSetup {
    int dim = 2;
    double kappa0 = 1.0;
    double alpha = 1.0;
    double c = 1.0;
    int max_atoms = 12;
    double sigma0 = 0.1;
    double sigma_min = 1e-3;
    std::uint64_t seed = 0;
    // Returns the payoff, or nullopt when the evaluation failed (rejected).
    std::function<std::optional<double>(const DiscreteMeasure&)> payoff;
    std::function<bool(std::span<const double>)> atom_feasible;
    DiscreteMeasure initial;
};

void renormalize(DiscreteMeasure& mu, double kappa0) {
    double total = 0.0;
    for (const Atom& a : mu.atoms) total += a.mass;
    if (total <= 0.0) return;
    const double s = kappa0 / total;
    for (Atom& a : mu.atoms) a.mass *= s;
}

OptReport anneal(const AnnealSetup& s, const AnnealOptions& opts) {
    if (opts.budget < 1)
        throw std::invalid_argument("optimize: budget must be >= 1");
    Rng rng(s.seed);
    const IrrigationOptions iropts{IrrigationOptions::Mode::Heuristic,
                                   irrigation_seed(s.seed), 1e-7, 400};

    auto evaluate = [&](const DiscreteMeasure& mu) -> std::optional<Candidate> {
        const auto pay = s.payoff(mu);
        if (!pay) return std::nullopt;
        Candidate c;
        c.mu = mu;
        c.payoff = *pay;
        c.cost = mu.atoms.empty()
                     ? 0.0
                     : irrigation_cost(mu, s.alpha, iropts).cost;
        c.objective = c.payoff - s.c * c.cost;
        return c;
    };

    OptReport rep;
    rep.seed = s.seed;
    auto initial = evaluate(s.initial);
    if (!initial)
        throw SolverError("optimize: initial candidate failed to evaluate", 0.0);
    Candidate current = *initial;
    rep.best = current;
    rep.evaluations = 1;
    rep.trace.push_back(rep.best.objective);

    const double t0 = 0.1 * std::max(std::abs(current.payoff), 1e-6);
    const long max_proposals = 50 * opts.budget;
    while (rep.evaluations < opts.budget && rep.proposals < max_proposals) {
        const double t = t0 * std::pow(0.999, static_cast<double>(rep.proposals));
        const double sigma =
            std::max(s.sigma_min, s.sigma0 * std::sqrt(t / t0));
        ++rep.proposals;

        DiscreteMeasure cand = current.mu;
        const double kind = rng.uniform01();
        bool shaped = false;
        if (kind < 0.55 && !cand.atoms.empty()) {
            Atom& a = cand.atoms[rng.index(cand.atoms.size())];
            for (int c = 0; c < s.dim; ++c) a.position[c] += sigma * rng.normal();
            shaped = true;
        } else if (kind < 0.70) {
            if (static_cast<int>(cand.atoms.size()) < s.max_atoms &&
                !cand.atoms.empty()) {
                const std::size_t i = rng.index(cand.atoms.size());
                Atom half = cand.atoms[i];
                half.mass *= 0.5;
                cand.atoms[i].mass *= 0.5;
                for (int c = 0; c < s.dim; ++c) {
                    const double jitter = 0.5 * sigma * rng.normal();
                    cand.atoms[i].position[c] += jitter;
                    half.position[c] -= jitter;
                }
                cand.atoms.push_back(half);
                shaped = true;
            }
        } else if (kind < 0.85) {
            if (cand.atoms.size() >= 2) {
                const std::size_t i = rng.index(cand.atoms.size());
                std::size_t j = rng.index(cand.atoms.size() - 1);
                if (j >= i) ++j;
                Atom& a = cand.atoms[i];
                const Atom& b = cand.atoms[j];
                const double m = a.mass + b.mass;
                for (int c = 0; c < s.dim; ++c)
                    a.position[c] =
                        (a.mass * a.position[c] + b.mass * b.position[c]) / m;
                a.mass = m;
                cand.atoms.erase(cand.atoms.begin() + j);
                shaped = true;
            }
        } else {
            if (cand.atoms.size() >= 2) {
                const std::size_t i = rng.index(cand.atoms.size());
                std::size_t j = rng.index(cand.atoms.size() - 1);
                if (j >= i) ++j;
                const double delta =
                    0.5 * rng.uniform01() * cand.atoms[i].mass;
                cand.atoms[i].mass -= delta;
                cand.atoms[j].mass += delta;
                shaped = cand.atoms[i].mass > 0.0;
            }
        }
        if (!shaped) {
            ++rep.rejected_infeasible;
            continue;
        }
        renormalize(cand, s.kappa0);
        bool feasible = true;
        for (const Atom& a : cand.atoms)
            if (!(a.mass > 0.0) || !s.atom_feasible(a.position)) {
                feasible = false;
                break;
            }
        if (!feasible) {
            ++rep.rejected_infeasible;
            continue;
        }

        const auto next = evaluate(cand);
        ++rep.evaluations;
        if (!next) {
            ++rep.pde_failures;
            rep.trace.push_back(rep.best.objective);
            continue;
        }
        const double delta = next->objective - current.objective;
        if (delta >= 0.0 || rng.uniform01() < std::exp(delta / t)) {
            current = *next;
            ++rep.accepted;
        }
        if (next->objective > rep.best.objective) rep.best = *next;
        rep.trace.push_back(rep.best.objective);
    }
    return rep;
}

}  // namespace

OptReport optimize_branches(const BranchProblem& p, const AnnealOptions& opts) {
    p.validate();
    const int d = p.omega.dim();
    const double r0 = support_radius(p.kappa0, p.alpha, p.c, p.eta);

    AnnealSetup s;
    s.dim = d;
    s.kappa0 = p.kappa0;
    s.alpha = p.alpha;
    s.c = p.c;
    s.max_atoms = p.max_atoms;
    s.seed = opts.seed;
    double diag = 0.0;
    for (int a = 0; a < d; ++a) diag += p.omega.extent(a) * p.omega.extent(a);
    diag = std::sqrt(diag);
    s.sigma0 = std::min(r0, diag) / 4.0;
    s.sigma_min = p.grid.min_cell_width() / 4.0;
    s.payoff = [&p](const DiscreteMeasure& mu) -> std::optional<double> {
        const GridDensity f = rasterize(mu, p.grid, p.smear_radius);
        return sunlight_total(f, p.eta, p.obstacle ? &*p.obstacle : nullptr);
    };
    s.atom_feasible = [&p, r0](std::span<const double> x) {
        return norm(x) <= r0 && p.omega.contains(x);
    };
    s.initial = DiscreteMeasure(d, {Atom{Point(d, 0.0), p.kappa0}});

    OptReport rep = anneal(s, opts);
    rep.support_radius = r0;
    rep.smear_radius = p.smear_radius;
    rep.certificates = certify(rep, p);
    return rep;
}

OptReport optimize_roots(const RootProblem& p, const AnnealOptions& opts) {
    p.validate();

    AnnealSetup s;
    s.dim = 2;
    s.kappa0 = p.kappa0;
    s.alpha = p.alpha;
    s.c = p.c;
    s.max_atoms = p.max_atoms;
    s.seed = opts.seed;
    double diag = 0.0;
    for (int a = 0; a < 2; ++a)
        diag += p.domain.box.extent(a) * p.domain.box.extent(a);
    s.sigma0 = std::sqrt(diag) / 8.0;
    s.sigma_min = p.grid.min_cell_width() / 4.0;
    s.payoff = [&p](const DiscreteMeasure& mu) -> std::optional<double> {
        const GridDensity f = rasterize(mu, p.grid, p.smear_radius);
        const MeasureCoefficient mc =
            MeasureCoefficient::from_grid_density(p.domain, f);
        try {
            const HarvestSolution sol =
                solve(p.domain, p.reaction, mc, p.bc, p.pde_tol, p.pde_max_iter);
            return harvest_value(p.domain, sol, mc);
        } catch (const SolverError&) {
            return std::nullopt;
        }
    };
    s.atom_feasible = [&p](std::span<const double> x) {
        return p.domain.box.contains(x);
    };
    s.initial = DiscreteMeasure(2, {Atom{Point(2, 0.0), p.kappa0}});

    OptReport rep = anneal(s, opts);
    rep.smear_radius = p.smear_radius;
    rep.certificates = certify(rep, p);
    return rep;
}

std::vector<AtomCertificate> certify(const OptReport& report,
                                     const BranchProblem& p) {
    const double r0 = support_radius(p.kappa0, p.alpha, p.c, p.eta);
    std::vector<AtomCertificate> certs;
    for (std::size_t i = 0; i < report.best.mu.atoms.size(); ++i) {
        const Atom& a = report.best.mu.atoms[i];
        AtomCertificate c;
        c.atom = static_cast<int>(i);
        c.radius = norm(a.position);
        c.threshold = r0;
        c.value = c.radius;
        c.passed = c.radius <= r0 + 1e-12 && p.omega.contains(a.position);
        certs.push_back(c);
    }
    return certs;
}

std::vector<AtomCertificate> certify(const OptReport& report,
                                     const RootProblem& p, double tol) {
    std::vector<AtomCertificate> certs;
    if (report.best.mu.atoms.empty()) return certs;
    const GridDensity f = rasterize(report.best.mu, p.grid, p.smear_radius);
    const MeasureCoefficient mc =
        MeasureCoefficient::from_grid_density(p.domain, f);
    const HarvestSolution sol =
        solve(p.domain, p.reaction, mc, p.bc, p.pde_tol, p.pde_max_iter);
    const double scale = p.c * p.alpha * std::pow(p.kappa0, p.alpha - 1.0);
    for (std::size_t i = 0; i < report.best.mu.atoms.size(); ++i) {
        const Atom& a = report.best.mu.atoms[i];
        AtomCertificate c;
        c.atom = static_cast<int>(i);
        c.radius = norm(a.position);
        c.threshold = scale * c.radius;
        c.value = interpolate(p.domain, sol.u, a.position);
        c.passed = c.value >= c.threshold - tol;
        certs.push_back(c);
    }
    return certs;
}

}  // namespace treeshape
