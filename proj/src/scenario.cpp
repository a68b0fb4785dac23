#include "treeshape/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <random>
#include <set>

#include "treeshape/parallel.hpp"
#include "treeshape/testing.hpp"

namespace treeshape {

namespace {

std::string jpath(const std::string& base, const char* key) {
    return base.empty() ? std::string(key) : base + "." + key;
}

struct Ctx {
    std::vector<std::string>& errors;

    void fail(const std::string& path, const std::string& msg) {
        errors.push_back(path + ": " + msg);
    }

    const json* object(const json& parent, const std::string& base,
                       const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return nullptr;
        }
        const json& j = parent.at(key);
        if (!j.is_object()) {
            fail(jpath(base, key), "expected an object");
            return nullptr;
        }
        return &j;
    }

    std::optional<double> number(const json& parent, const std::string& base,
                                 const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return std::nullopt;
        }
        const json& j = parent.at(key);
        if (!j.is_number()) {
            fail(jpath(base, key), "expected a number");
            return std::nullopt;
        }
        return j.get<double>();
    }

    std::optional<long long> integer(const json& parent, const std::string& base,
                                     const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return std::nullopt;
        }
        const json& j = parent.at(key);
        if (!j.is_number_integer()) {
            fail(jpath(base, key), "expected an integer");
            return std::nullopt;
        }
        return j.get<long long>();
    }

    std::optional<std::string> text(const json& parent, const std::string& base,
                                    const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return std::nullopt;
        }
        const json& j = parent.at(key);
        if (!j.is_string()) {
            fail(jpath(base, key), "expected a string");
            return std::nullopt;
        }
        return j.get<std::string>();
    }

    std::optional<bool> boolean(const json& parent, const std::string& base,
                                const char* key) {
        if (!parent.contains(key)) return std::nullopt;
        const json& j = parent.at(key);
        if (!j.is_boolean()) {
            fail(jpath(base, key), "expected a boolean");
            return std::nullopt;
        }
        return j.get<bool>();
    }

    std::optional<Point> point(const json& parent, const std::string& base,
                               const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return std::nullopt;
        }
        const json& j = parent.at(key);
        if (!j.is_array() || j.empty()) {
            fail(jpath(base, key), "expected a non-empty array of numbers");
            return std::nullopt;
        }
        Point p;
        for (const json& v : j) {
            if (!v.is_number()) {
                fail(jpath(base, key), "expected a non-empty array of numbers");
                return std::nullopt;
            }
            p.push_back(v.get<double>());
        }
        return p;
    }

    std::optional<std::vector<int>> int_array(const json& parent,
                                              const std::string& base,
                                              const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(jpath(base, key), "missing required key");
            return std::nullopt;
        }
        const json& j = parent.at(key);
        if (!j.is_array() || j.empty()) {
            fail(jpath(base, key), "expected a non-empty array of integers");
            return std::nullopt;
        }
        std::vector<int> v;
        for (const json& e : j) {
            if (!e.is_number_integer()) {
                fail(jpath(base, key), "expected a non-empty array of integers");
                return std::nullopt;
            }
            v.push_back(e.get<int>());
        }
        return v;
    }

    void check_keys(const json& o, const std::string& base,
                    std::initializer_list<const char*> allowed) {
        for (const auto& [key, value] : o.items()) {
            bool known = false;
            for (const char* k : allowed)
                if (key == k) known = true;
            if (!known) fail(jpath(base, key.c_str()), "unknown key");
        }
    }
};

std::optional<BoxDomain> parse_box(Ctx& ctx, const json& parent,
                                   const std::string& base, const char* key,
                                   bool required) {
    const json* jb = ctx.object(parent, base, key, required);
    if (!jb) return std::nullopt;
    const std::string path = jpath(base, key);
    ctx.check_keys(*jb, path, {"lo", "hi"});
    auto lo = ctx.point(*jb, path, "lo", true);
    auto hi = ctx.point(*jb, path, "hi", true);
    if (!lo || !hi) return std::nullopt;
    try {
        return BoxDomain(*lo, *hi);
    } catch (const std::invalid_argument& e) {
        ctx.fail(path, e.what());
        return std::nullopt;
    }
}

std::optional<GridSpec> parse_grid(Ctx& ctx, const json& parent,
                                   const std::string& base, const char* key,
                                   bool required) {
    const json* jg = ctx.object(parent, base, key, required);
    if (!jg) return std::nullopt;
    const std::string path = jpath(base, key);
    ctx.check_keys(*jg, path, {"lo", "hi", "resolution"});
    auto lo = ctx.point(*jg, path, "lo", true);
    auto hi = ctx.point(*jg, path, "hi", true);
    auto res = ctx.int_array(*jg, path, "resolution", true);
    if (!lo || !hi || !res) return std::nullopt;
    try {
        GridSpec spec{BoxDomain(*lo, *hi), *res};
        spec.validate();
        return spec;
    } catch (const std::invalid_argument& e) {
        ctx.fail(path, e.what());
        return std::nullopt;
    }
}

std::optional<DiscreteMeasure> parse_measure(Ctx& ctx, const json& parent,
                                             const std::string& base,
                                             const char* key, bool required) {
    if (!parent.contains(key)) {
        if (required) ctx.fail(jpath(base, key), "missing required key");
        return std::nullopt;
    }
    try {
        return measure_from_json(parent.at(key));
    } catch (const std::exception& e) {
        ctx.fail(jpath(base, key), e.what());
        return std::nullopt;
    }
}

struct LightSpec {
    IntensityModel model;
    std::optional<int> hemisphere_count;
};

std::optional<LightSpec> parse_light(Ctx& ctx, const json& parent,
                                     const std::string& base, int dim) {
    const json* jl = ctx.object(parent, base, "light", true);
    if (!jl) return std::nullopt;
    const std::string path = jpath(base, "light");
    ctx.check_keys(*jl, path, {"hemisphere_count", "directions"});
    const bool has_count = jl->contains("hemisphere_count");
    const bool has_dirs = jl->contains("directions");
    if (has_count == has_dirs) {
        ctx.fail(path, "need exactly one of hemisphere_count or directions");
        return std::nullopt;
    }
    LightSpec out;
    if (has_count) {
        auto count = ctx.integer(*jl, path, "hemisphere_count", true);
        if (!count) return std::nullopt;
        if (*count < 1) {
            ctx.fail(jpath(path.c_str(), "hemisphere_count"),
                     "must be >= 1");
            return std::nullopt;
        }
        out.hemisphere_count = static_cast<int>(*count);
        out.model = hemisphere_intensity(dim, static_cast<int>(*count));
        return out;
    }
    const json& dirs = jl->at("directions");
    if (!dirs.is_array() || dirs.empty()) {
        ctx.fail(jpath(path.c_str(), "directions"), "expected a non-empty array");
        return std::nullopt;
    }
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const std::string dpath =
            path + ".directions[" + std::to_string(i) + "]";
        if (!dirs[i].is_object()) {
            ctx.fail(dpath, "expected an object");
            return std::nullopt;
        }
        ctx.check_keys(dirs[i], dpath, {"n", "weight"});
        auto n = ctx.point(dirs[i], dpath, "n", true);
        auto w = ctx.number(dirs[i], dpath, "weight", true);
        if (!n || !w) return std::nullopt;
        if (!(*w > 0.0)) {
            ctx.fail(dpath + ".weight", "must be > 0");
            return std::nullopt;
        }
        try {
            out.model.directions.emplace_back(Direction(*n), *w);
        } catch (const std::invalid_argument& e) {
            ctx.fail(dpath + ".n", e.what());
            return std::nullopt;
        }
    }
    return out;
}

std::optional<BoundaryKind> parse_bc(Ctx& ctx, const json& parent,
                                     const std::string& base) {
    auto s = ctx.text(parent, base, "bc", true);
    if (!s) return std::nullopt;
    if (*s == "neumann") return BoundaryKind::Neumann;
    if (*s == "dirichlet") return BoundaryKind::Dirichlet;
    ctx.fail(jpath(base, "bc"), "expected \"neumann\" or \"dirichlet\"");
    return std::nullopt;
}

const std::set<std::string> kModes = {
    "sunlight",          "irrigate",       "harvest",
    "optimize-branches", "optimize-roots", "selftest"};

void parse_sunlight(Ctx& ctx, const json& j, ScenarioConfig& cfg) {
    ctx.check_keys(j, "",
                   {"mode", "seed", "out_dir", "grid", "measure",
                    "density_constant", "smear_radius", "light",
                    "obstacle_constant", "export_planes"});
    SunlightScenario s;
    auto grid = parse_grid(ctx, j, "", "grid", true);
    if (grid) s.grid = *grid;
    const bool has_measure = j.contains("measure");
    const bool has_const = j.contains("density_constant");
    if (has_measure == has_const)
        ctx.fail("measure", "need exactly one of measure or density_constant");
    if (has_measure) {
        s.measure = parse_measure(ctx, j, "", "measure", true);
        auto smear = ctx.number(j, "", "smear_radius", true);
        if (smear) {
            s.smear_radius = *smear;
            if (grid && !(*smear >= 2.0 * grid->max_cell_width()))
                ctx.fail("smear_radius",
                         "must be >= 2 cell widths at this resolution");
        }
    }
    if (has_const) {
        auto dc = ctx.number(j, "", "density_constant", true);
        if (dc) {
            if (!(*dc >= 0.0)) ctx.fail("density_constant", "must be >= 0");
            s.density_constant = *dc;
        }
    }
    const int dim = grid ? grid->dim() : 2;
    auto light = parse_light(ctx, j, "", dim);
    if (light) {
        s.light = light->model;
        s.hemisphere_count = light->hemisphere_count;
    }
    if (j.contains("obstacle_constant")) {
        auto oc = ctx.number(j, "", "obstacle_constant", true);
        if (oc) {
            if (!(*oc >= 0.0)) ctx.fail("obstacle_constant", "must be >= 0");
            s.obstacle_constant = *oc;
        }
    }
    if (auto ep = ctx.boolean(j, "", "export_planes")) s.export_planes = *ep;
    if (s.measure && grid && s.measure->dim != grid->dim())
        ctx.fail("measure.d", "dimension must match the grid");
    if (ctx.errors.empty()) cfg.sunlight = std::move(s);
}

void parse_irrigate(Ctx& ctx, const json& j, ScenarioConfig& cfg) {
    ctx.check_keys(j, "", {"mode", "seed", "out_dir", "measure", "alpha",
                           "irrigation"});
    IrrigateScenario s;
    auto mu = parse_measure(ctx, j, "", "measure", true);
    if (mu) s.measure = *mu;
    auto alpha = ctx.number(j, "", "alpha", true);
    if (alpha) {
        s.alpha = *alpha;
        if (!(*alpha > 0.0 && *alpha <= 1.0))
            ctx.fail("alpha", "must be in (0, 1]");
    }
    s.opts.mode = IrrigationOptions::Mode::Exhaustive;
    s.opts.seed = cfg.seed;
    if (const json* ji = ctx.object(j, "", "irrigation", false)) {
        ctx.check_keys(*ji, "irrigation", {"mode", "tol", "max_iter", "seed"});
        if (auto m = ctx.text(*ji, "irrigation", "mode", false)) {
            if (*m == "exhaustive")
                s.opts.mode = IrrigationOptions::Mode::Exhaustive;
            else if (*m == "heuristic")
                s.opts.mode = IrrigationOptions::Mode::Heuristic;
            else
                ctx.fail("irrigation.mode",
                         "expected \"exhaustive\" or \"heuristic\"");
        }
        if (auto t = ctx.number(*ji, "irrigation", "tol", false)) {
            if (!(*t > 0.0)) ctx.fail("irrigation.tol", "must be > 0");
            s.opts.tol = *t;
        }
        if (auto it = ctx.integer(*ji, "irrigation", "max_iter", false)) {
            if (*it < 1) ctx.fail("irrigation.max_iter", "must be >= 1");
            s.opts.max_iter = static_cast<int>(*it);
        }
        if (auto sd = ctx.integer(*ji, "irrigation", "seed", false))
            s.opts.seed = static_cast<std::uint64_t>(*sd);
    }
    if (mu && s.opts.mode == IrrigationOptions::Mode::Exhaustive &&
        mu->atoms.size() > 7)
        ctx.fail("measure.atoms", "exhaustive mode supports at most 7 atoms");
    if (ctx.errors.empty()) cfg.irrigate = std::move(s);
}

void parse_harvest(Ctx& ctx, const json& j, ScenarioConfig& cfg) {
    ctx.check_keys(j, "",
                   {"mode", "seed", "out_dir", "domain", "nodes", "reaction",
                    "bc", "coefficient_constant", "measure", "smear_radius",
                    "pde"});
    HarvestScenario s;
    auto box = parse_box(ctx, j, "", "domain", true);
    if (box) {
        if (box->dim() != 2)
            ctx.fail("domain", "harvest runs are 2-D only");
        else
            s.box = *box;
    }
    if (auto nodes = ctx.int_array(j, "", "nodes", true)) {
        if (nodes->size() != 2 || (*nodes)[0] < 3 || (*nodes)[1] < 3) {
            ctx.fail("nodes", "expected [nx, ny] with nx, ny >= 3");
        } else {
            s.nx = (*nodes)[0];
            s.ny = (*nodes)[1];
        }
    }
    if (const json* jr = ctx.object(j, "", "reaction", true)) {
        ctx.check_keys(*jr, "reaction", {"a", "b", "M"});
        auto a = ctx.number(*jr, "reaction", "a", true);
        auto b = ctx.number(*jr, "reaction", "b", true);
        auto M = ctx.number(*jr, "reaction", "M", true);
        if (a) s.a = *a;
        if (b) s.b = *b;
        if (M) s.M = *M;
        if (a && !(*a >= 0.0)) ctx.fail("reaction.a", "must be >= 0");
        if (b && !(*b > 0.0)) ctx.fail("reaction.b", "must be > 0");
        if (M && !(*M > 0.0)) ctx.fail("reaction.M", "must be > 0");
        if (a && b && M && *a > *b * *M)
            ctx.fail("reaction.a", "must satisfy a <= b*M");
    }
    if (auto bc = parse_bc(ctx, j, "")) s.bc = *bc;
    const bool has_const = j.contains("coefficient_constant");
    const bool has_measure = j.contains("measure");
    if (has_const && has_measure)
        ctx.fail("coefficient_constant",
                 "give either coefficient_constant or measure, not both");
    if (has_const) {
        auto c = ctx.number(j, "", "coefficient_constant", true);
        if (c) {
            if (!(*c >= 0.0)) ctx.fail("coefficient_constant", "must be >= 0");
            s.coefficient_constant = *c;
        }
    }
    if (has_measure) {
        s.measure = parse_measure(ctx, j, "", "measure", true);
        auto smear = ctx.number(j, "", "smear_radius", true);
        if (smear) {
            s.smear_radius = *smear;
            if (box && s.nx >= 3 &&
                !(*smear >= 2.0 * std::max(box->extent(0) / s.nx,
                                           box->extent(1) / s.ny)))
                ctx.fail("smear_radius",
                         "must be >= 2 cell widths at this resolution");
        }
        if (s.measure && s.measure->dim != 2)
            ctx.fail("measure.d", "harvest measures are 2-D");
    }
    if (const json* jp = ctx.object(j, "", "pde", false)) {
        ctx.check_keys(*jp, "pde", {"tol", "max_iter"});
        if (auto t = ctx.number(*jp, "pde", "tol", false)) {
            if (!(*t > 0.0)) ctx.fail("pde.tol", "must be > 0");
            s.tol = *t;
        }
        if (auto it = ctx.integer(*jp, "pde", "max_iter", false)) {
            if (*it < 1) ctx.fail("pde.max_iter", "must be >= 1");
            s.max_iter = static_cast<int>(*it);
        }
    }
    if (ctx.errors.empty()) cfg.harvest = std::move(s);
}

void parse_branches(Ctx& ctx, const json& j, ScenarioConfig& cfg) {
    ctx.check_keys(j, "",
                   {"mode", "seed", "out_dir", "omega", "grid", "smear_radius",
                    "light", "obstacle_constant", "alpha", "c", "kappa0",
                    "budget", "max_atoms"});
    BranchScenario s;
    auto omega = parse_box(ctx, j, "", "omega", true);
    if (omega) s.problem.omega = *omega;
    const int dim = omega ? omega->dim() : 2;
    if (j.contains("grid")) {
        auto grid = parse_grid(ctx, j, "", "grid", true);
        if (grid) s.problem.grid = *grid;
    } else if (omega) {
        s.problem.grid = GridSpec{*omega, std::vector<int>(dim, 48)};
    }
    auto smear = ctx.number(j, "", "smear_radius", true);
    if (smear) s.problem.smear_radius = *smear;
    auto light = parse_light(ctx, j, "", dim);
    if (light) {
        s.problem.eta = light->model;
        s.hemisphere_count = light->hemisphere_count;
    }
    if (j.contains("obstacle_constant")) {
        auto oc = ctx.number(j, "", "obstacle_constant", true);
        if (oc) {
            if (!(*oc >= 0.0)) ctx.fail("obstacle_constant", "must be >= 0");
            s.obstacle_constant = *oc;
        }
    }
    auto alpha = ctx.number(j, "", "alpha", true);
    if (alpha) {
        s.problem.alpha = *alpha;
        if (!(*alpha > 1.0 - 1.0 / (dim - 1) && *alpha <= 1.0))
            ctx.fail("alpha", "must satisfy 1 - 1/(d-1) < alpha <= 1");
    }
    auto c = ctx.number(j, "", "c", true);
    if (c) {
        s.problem.c = *c;
        if (!(*c > 0.0)) ctx.fail("c", "must be > 0");
    }
    auto kappa = ctx.number(j, "", "kappa0", true);
    if (kappa) {
        s.problem.kappa0 = *kappa;
        if (!(*kappa > 0.0)) ctx.fail("kappa0", "must be > 0");
    }
    if (auto b = ctx.integer(j, "", "budget", false)) {
        if (*b < 1) ctx.fail("budget", "must be >= 1");
        s.budget = *b;
    }
    if (auto ma = ctx.integer(j, "", "max_atoms", false)) {
        if (*ma < 1) ctx.fail("max_atoms", "must be >= 1");
        s.problem.max_atoms = static_cast<int>(*ma);
    }
    if (ctx.errors.empty()) {
        if (s.obstacle_constant)
            s.problem.obstacle = GridDensity(s.problem.grid, *s.obstacle_constant);
        try {
            s.problem.validate();
            cfg.branches = std::move(s);
        } catch (const std::invalid_argument& e) {
            ctx.fail("optimize-branches", e.what());
        }
    }
}

void parse_roots(Ctx& ctx, const json& j, ScenarioConfig& cfg) {
    ctx.check_keys(j, "",
                   {"mode", "seed", "out_dir", "domain", "nodes", "reaction",
                    "bc", "smear_radius", "alpha", "c", "kappa0", "budget",
                    "max_atoms", "pde"});
    RootScenario s;
    std::optional<BoxDomain> box = parse_box(ctx, j, "", "domain", true);
    int nx = 33, ny = 33;
    if (auto nodes = ctx.int_array(j, "", "nodes", false)) {
        if (nodes->size() != 2 || (*nodes)[0] < 3 || (*nodes)[1] < 3) {
            ctx.fail("nodes", "expected [nx, ny] with nx, ny >= 3");
        } else {
            nx = (*nodes)[0];
            ny = (*nodes)[1];
        }
    }
    double a = 1.0, b = 1.0, M = 1.0;
    if (const json* jr = ctx.object(j, "", "reaction", true)) {
        ctx.check_keys(*jr, "reaction", {"a", "b", "M"});
        auto ja = ctx.number(*jr, "reaction", "a", true);
        auto jb = ctx.number(*jr, "reaction", "b", true);
        auto jM = ctx.number(*jr, "reaction", "M", true);
        if (ja) a = *ja;
        if (jb) b = *jb;
        if (jM) M = *jM;
        if (ja && !(*ja >= 0.0)) ctx.fail("reaction.a", "must be >= 0");
        if (jb && !(*jb > 0.0)) ctx.fail("reaction.b", "must be > 0");
        if (jM && !(*jM > 0.0)) ctx.fail("reaction.M", "must be > 0");
        if (ja && jb && jM && *ja > *jb * *jM)
            ctx.fail("reaction.a", "must satisfy a <= b*M");
    }
    std::optional<BoundaryKind> bc = parse_bc(ctx, j, "");
    auto smear = ctx.number(j, "", "smear_radius", true);
    auto alpha = ctx.number(j, "", "alpha", true);
    if (alpha && !(*alpha > 0.0 && *alpha <= 1.0))
        ctx.fail("alpha", "must be in (0, 1]");
    auto c = ctx.number(j, "", "c", true);
    if (c && !(*c > 0.0)) ctx.fail("c", "must be > 0");
    auto kappa = ctx.number(j, "", "kappa0", true);
    if (kappa && !(*kappa > 0.0)) ctx.fail("kappa0", "must be > 0");
    if (auto jb = ctx.integer(j, "", "budget", false)) {
        if (*jb < 1) ctx.fail("budget", "must be >= 1");
        s.budget = *jb;
    }
    if (auto ma = ctx.integer(j, "", "max_atoms", false)) {
        if (*ma < 1) ctx.fail("max_atoms", "must be >= 1");
        s.problem.max_atoms = static_cast<int>(*ma);
    }
    if (const json* jp = ctx.object(j, "", "pde", false)) {
        ctx.check_keys(*jp, "pde", {"tol", "max_iter"});
        if (auto t = ctx.number(*jp, "pde", "tol", false)) {
            if (!(*t > 0.0)) ctx.fail("pde.tol", "must be > 0");
            s.problem.pde_tol = *t;
        }
        if (auto it = ctx.integer(*jp, "pde", "max_iter", false)) {
            if (*it < 1) ctx.fail("pde.max_iter", "must be >= 1");
            s.problem.pde_max_iter = static_cast<int>(*it);
        }
    }
    if (!ctx.errors.empty()) return;
    try {
        s.problem.domain = DomainGrid2D(*box, nx, ny, *bc);
        s.problem.reaction =
            ReactionSpec::constant(s.problem.domain, a, b, M);
        s.problem.bc = *bc;
        s.problem.grid = GridSpec{*box, {nx, ny}};
        s.problem.smear_radius = *smear;
        s.problem.alpha = *alpha;
        s.problem.c = *c;
        s.problem.kappa0 = *kappa;
        s.reaction_a = a;
        s.problem.validate();
        cfg.roots = std::move(s);
    } catch (const std::invalid_argument& e) {
        ctx.fail("optimize-roots", e.what());
    }
}

}  // namespace

ParseResult parse_config_json(const json& j) {
    ParseResult res;
    Ctx ctx{res.errors};
    if (!j.is_object()) {
        ctx.fail("", "config must be a JSON object");
        return res;
    }
    ScenarioConfig cfg;
    auto mode = ctx.text(j, "", "mode", true);
    if (mode) {
        if (!kModes.count(*mode)) {
            ctx.fail("mode",
                     "expected one of sunlight, irrigate, harvest, "
                     "optimize-branches, optimize-roots, selftest");
            return res;
        }
        cfg.mode = *mode;
    } else {
        return res;
    }
    if (auto seed = ctx.integer(j, "", "seed", false))
        cfg.seed = static_cast<std::uint64_t>(*seed);
    if (auto out = ctx.text(j, "", "out_dir", false)) cfg.out_dir = *out;

    if (cfg.mode == "sunlight") parse_sunlight(ctx, j, cfg);
    else if (cfg.mode == "irrigate") parse_irrigate(ctx, j, cfg);
    else if (cfg.mode == "harvest") parse_harvest(ctx, j, cfg);
    else if (cfg.mode == "optimize-branches") parse_branches(ctx, j, cfg);
    else if (cfg.mode == "optimize-roots") parse_roots(ctx, j, cfg);
    else ctx.check_keys(j, "", {"mode", "seed", "out_dir"});

    if (res.errors.empty()) res.config = std::move(cfg);
    return res;
}

ParseResult parse_config(const std::filesystem::path& path) {
    ParseResult res;
    std::ifstream in(path);
    if (!in) {
        res.errors.push_back(path.string() + ": cannot open config file");
        return res;
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        res.errors.push_back(path.string() + ": " + e.what());
        return res;
    }
    return parse_config_json(j);
}

namespace {

json grid_spec_json(const GridSpec& g) {
    return json{{"lo", g.domain.lower},
                {"hi", g.domain.upper},
                {"resolution", g.resolution}};
}

json light_json(const IntensityModel& m, const std::optional<int>& count) {
    if (count) return json{{"hemisphere_count", *count}};
    json dirs = json::array();
    for (const auto& [n, w] : m.directions)
        dirs.push_back(json{{"n", n.n}, {"weight", w}});
    return json{{"directions", dirs}};
}

}  // namespace

json config_to_json(const ScenarioConfig& cfg) {
    json j{{"mode", cfg.mode},
           {"seed", cfg.seed},
           {"out_dir", cfg.out_dir}};
    if (cfg.sunlight) {
        const SunlightScenario& s = *cfg.sunlight;
        j["grid"] = grid_spec_json(s.grid);
        if (s.measure) {
            j["measure"] = measure_to_json(*s.measure);
            j["smear_radius"] = s.smear_radius;
        }
        if (s.density_constant) j["density_constant"] = *s.density_constant;
        j["light"] = light_json(s.light, s.hemisphere_count);
        if (s.obstacle_constant) j["obstacle_constant"] = *s.obstacle_constant;
        j["export_planes"] = s.export_planes;
    }
    if (cfg.irrigate) {
        const IrrigateScenario& s = *cfg.irrigate;
        j["measure"] = measure_to_json(s.measure);
        j["alpha"] = s.alpha;
        j["irrigation"] =
            json{{"mode", s.opts.mode == IrrigationOptions::Mode::Exhaustive
                              ? "exhaustive"
                              : "heuristic"},
                 {"tol", s.opts.tol},
                 {"max_iter", s.opts.max_iter},
                 {"seed", s.opts.seed}};
    }
    if (cfg.harvest) {
        const HarvestScenario& s = *cfg.harvest;
        j["domain"] = json{{"lo", s.box.lower}, {"hi", s.box.upper}};
        j["nodes"] = std::vector<int>{s.nx, s.ny};
        j["reaction"] = json{{"a", s.a}, {"b", s.b}, {"M", s.M}};
        j["bc"] = s.bc == BoundaryKind::Neumann ? "neumann" : "dirichlet";
        if (s.coefficient_constant)
            j["coefficient_constant"] = *s.coefficient_constant;
        if (s.measure) {
            j["measure"] = measure_to_json(*s.measure);
            j["smear_radius"] = s.smear_radius;
        }
        j["pde"] = json{{"tol", s.tol}, {"max_iter", s.max_iter}};
    }
    if (cfg.branches) {
        const BranchScenario& s = *cfg.branches;
        j["omega"] = json{{"lo", s.problem.omega.lower},
                          {"hi", s.problem.omega.upper}};
        j["grid"] = grid_spec_json(s.problem.grid);
        j["smear_radius"] = s.problem.smear_radius;
        j["light"] = light_json(s.problem.eta, s.hemisphere_count);
        if (s.obstacle_constant) j["obstacle_constant"] = *s.obstacle_constant;
        j["alpha"] = s.problem.alpha;
        j["c"] = s.problem.c;
        j["kappa0"] = s.problem.kappa0;
        j["budget"] = s.budget;
        j["max_atoms"] = s.problem.max_atoms;
    }
    if (cfg.roots) {
        const RootScenario& s = *cfg.roots;
        j["domain"] = json{{"lo", s.problem.domain.box.lower},
                           {"hi", s.problem.domain.box.upper}};
        j["nodes"] = std::vector<int>{s.problem.domain.nx, s.problem.domain.ny};
        j["reaction"] = json{{"a", s.reaction_a},
                             {"b", s.problem.reaction.b},
                             {"M", s.problem.reaction.M}};
        j["bc"] =
            s.problem.bc == BoundaryKind::Neumann ? "neumann" : "dirichlet";
        j["smear_radius"] = s.problem.smear_radius;
        j["alpha"] = s.problem.alpha;
        j["c"] = s.problem.c;
        j["kappa0"] = s.problem.kappa0;
        j["budget"] = s.budget;
        j["max_atoms"] = s.problem.max_atoms;
        j["pde"] = json{{"tol", s.problem.pde_tol},
                        {"max_iter", s.problem.pde_max_iter}};
    }
    return j;
}

namespace {

std::string dumps(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

RunManifest run_scenario(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest man;
    man.version = kVersion;
    man.config_echo = config_to_json(cfg);
    const std::filesystem::path out_dir = cfg.out_dir;
    std::filesystem::create_directories(out_dir);
    auto emit = [&](const std::string& name, const std::string& data) {
        atomic_write(out_dir / name, data);
        man.outputs.push_back(name);
    };

    json result;
    if (cfg.mode == "sunlight") {
        const SunlightScenario& s = *cfg.sunlight;
        GridDensity f = s.measure ? rasterize(*s.measure, s.grid, s.smear_radius)
                                  : GridDensity(s.grid, *s.density_constant);
        std::optional<GridDensity> obstacle;
        if (s.obstacle_constant)
            obstacle = GridDensity(s.grid, *s.obstacle_constant);
        const GridDensity* obs = obstacle ? &*obstacle : nullptr;
        const std::vector<double> per = sunlight_per_direction(f, s.light, obs);
        std::vector<double> weighted(per.size());
        for (std::size_t i = 0; i < per.size(); ++i)
            weighted[i] = s.light.directions[i].second * per[i];
        const double total = par::pairwise_sum(weighted);
        result = json{{"S", total}, {"per_direction", per}};
        if (s.export_planes) {
            for (std::size_t i = 0; i < s.light.directions.size(); ++i) {
                const PlaneDensity p = project_density(
                    f, s.light.directions[i].first, f.spec.min_cell_width());
                emit("plane_" + std::to_string(i) + ".csv", plane_to_csv(p));
            }
        }
        emit("sunlight_result.json", dumps(result));
    } else if (cfg.mode == "irrigate") {
        const IrrigateScenario& s = *cfg.irrigate;
        const IrrigationResult r = irrigation_cost(s.measure, s.alpha, s.opts);
        result = json{{"cost", r.cost}, {"tree", tree_to_json(r.tree)}};
        emit("irrigate_result.json", dumps(result));
        if (s.measure.dim == 2)
            emit("tree.svg", render_svg(r.tree, s.alpha));
    } else if (cfg.mode == "harvest") {
        const HarvestScenario& s = *cfg.harvest;
        const DomainGrid2D grid(s.box, s.nx, s.ny, s.bc);
        const ReactionSpec reaction = ReactionSpec::constant(grid, s.a, s.b, s.M);
        MeasureCoefficient mc = MeasureCoefficient::zero(grid);
        if (s.coefficient_constant)
            mc = MeasureCoefficient::constant(grid, *s.coefficient_constant);
        else if (s.measure) {
            const GridDensity f =
                rasterize(*s.measure, GridSpec{s.box, {s.nx, s.ny}},
                          s.smear_radius);
            mc = MeasureCoefficient::from_grid_density(grid, f);
        }
        const HarvestSolution sol =
            solve(grid, reaction, mc, s.bc, s.tol, s.max_iter);
        result = json{{"H", harvest_value(grid, sol, mc)},
                      {"H_flux_form", harvest_flux_form(grid, sol, reaction)},
                      {"iterations", sol.iterations},
                      {"residual", sol.residual}};
        emit("harvest_result.json", dumps(result));
        // u field as CSV plus header, row-major over y.
        std::string csv;
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int ix = 0; ix < grid.nx; ++ix) {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g",
                              sol.u[grid.index(ix, iy)]);
                csv += buf;
                csv += ix + 1 == grid.nx ? '\n' : ',';
            }
        }
        emit("u.csv", csv);
        emit("u_header.json",
             dumps(json{{"domain", {{"lo", s.box.lower}, {"hi", s.box.upper}}},
                        {"nodes", {grid.nx, grid.ny}}}));
    } else if (cfg.mode == "optimize-branches") {
        const BranchScenario& s = *cfg.branches;
        const OptReport rep =
            optimize_branches(s.problem, AnnealOptions{s.budget, cfg.seed});
        result = report_to_json(rep);
        emit("report.json", dumps(result));
        emit("best_measure.json", dumps(measure_to_json(rep.best.mu)));
        emit("trace.csv", trace_to_csv(rep));
        if (s.problem.omega.dim() == 2) {
            const GridDensity f =
                rasterize(rep.best.mu, s.problem.grid, s.problem.smear_radius);
            const IrrigationOptions iropts{IrrigationOptions::Mode::Heuristic,
                                           irrigation_seed(cfg.seed), 1e-7, 400};
            const IrrigationResult ir =
                irrigation_cost(rep.best.mu, s.problem.alpha, iropts);
            emit("overlay.svg", render_svg(f, &ir.tree, s.problem.alpha));
        }
    } else if (cfg.mode == "optimize-roots") {
        const RootScenario& s = *cfg.roots;
        const OptReport rep =
            optimize_roots(s.problem, AnnealOptions{s.budget, cfg.seed});
        result = report_to_json(rep);
        emit("report.json", dumps(result));
        emit("best_measure.json", dumps(measure_to_json(rep.best.mu)));
        emit("trace.csv", trace_to_csv(rep));
        const GridDensity f =
            rasterize(rep.best.mu, s.problem.grid, s.problem.smear_radius);
        const IrrigationOptions iropts{IrrigationOptions::Mode::Heuristic,
                                       irrigation_seed(cfg.seed), 1e-7, 400};
        const IrrigationResult ir =
            irrigation_cost(rep.best.mu, s.problem.alpha, iropts);
        emit("overlay.svg", render_svg(f, &ir.tree, s.problem.alpha));
    } else if (cfg.mode == "selftest") {
        result = run_selftest(cfg.seed);
        emit("selftest_result.json", dumps(result));
    } else {
        throw std::invalid_argument("run_scenario: unknown mode " + cfg.mode);
    }

    man.key_results = result;
    man.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json manifest{{"config", man.config_echo},
                  {"version", man.version},
                  {"wall_time_s", man.wall_time_s},
                  {"outputs", man.outputs},
                  {"results", man.key_results}};
    atomic_write(out_dir / "manifest.json", dumps(manifest));
    man.outputs.push_back("manifest.json");
    return man;
}

namespace {

struct Check {
    std::string name;
    bool passed;
    std::string detail;
};

template <typename Fn>
void run_check(std::vector<Check>& checks, const std::string& name, Fn&& fn) {
    try {
        checks.push_back({name, fn(), ""});
    } catch (const std::exception& e) {
        checks.push_back({name, false, e.what()});
    }
}

}  // namespace

json run_selftest(std::uint64_t seed) {
    std::vector<Check> checks;
    std::mt19937_64 rng(seed);

    run_check(checks, "measure.mass_conservation", [&] {
        const DiscreteMeasure mu = testing::random_measure(rng, 2, 1, 6, 0.8);
        const double m = total_mass(mu);
        bool ok = std::abs(total_mass(dilate(mu, 1.7)) - m) <= 1e-12 * (1 + m);
        ok = ok && std::abs(total_mass(scale_mass(mu, 3.0)) - 3 * m) <=
                       1e-12 * (1 + m);
        ok = ok &&
             std::abs(total_mass(add(mu, mu)) - 2 * m) <= 1e-12 * (1 + m);
        const GridSpec spec{BoxDomain{{-1.5, -1.5}, {1.5, 1.5}}, {48, 48}};
        const GridDensity f = rasterize(mu, spec, 0.2);
        ok = ok && std::abs(total_mass(f) - m) <= 1e-9 * (1 + m);
        return ok;
    });
    run_check(checks, "measure.dilate_composition", [&] {
        const DiscreteMeasure mu = testing::random_measure(rng, 2, 1, 5, 1.0);
        const DiscreteMeasure a = dilate(dilate(mu, 0.7), 2.3);
        const DiscreteMeasure b = dilate(mu, 0.7 * 2.3);
        for (std::size_t i = 0; i < mu.atoms.size(); ++i)
            if (dist(a.atoms[i].position, b.atoms[i].position) > 1e-12)
                return false;
        return true;
    });
    run_check(checks, "sunlight.constant_square", [&] {
        const GridSpec spec{BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, {64, 64}};
        const GridDensity f(spec, 1.0);
        const double s =
            sunlight_directional(f, Direction(Point{0.0, -1.0}));
        return std::abs(s - (1.0 - std::exp(-1.0))) <= 1e-3;
    });
    run_check(checks, "sunlight.obstacle_identity", [&] {
        const GridDensity f = testing::random_blocks_field(rng, 48);
        const GridDensity zero(f.spec, 0.0);
        const Direction n = testing::random_direction2(rng);
        return std::abs(sunlight_with_obstacle(f, zero, n) -
                        sunlight_directional(f, n)) <= 1e-9;
    });
    run_check(checks, "sunlight.obstacle_constant", [&] {
        const GridSpec spec{BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, {64, 64}};
        const GridDensity f(spec, 1.0), g(spec, 1.0);
        const double s =
            sunlight_with_obstacle(f, g, Direction(Point{0.0, -1.0}));
        return std::abs(s - 0.5 * (1.0 - std::exp(-2.0))) <= 1e-3;
    });
    run_check(checks, "sunlight.mass_bound", [&] {
        for (int i = 0; i < 5; ++i) {
            const GridDensity f = testing::random_blocks_field(rng, 48);
            const Direction n = testing::random_direction2(rng);
            if (sunlight_directional(f, n) > total_mass(f) + 1e-6) return false;
        }
        return true;
    });
    run_check(checks, "sunlight.subadditive", [&] {
        for (int i = 0; i < 5; ++i) {
            const GridDensity f1 = testing::random_blocks_field(rng, 48);
            const GridDensity f2 = testing::random_blocks_field(rng, 48);
            const Direction n = testing::random_direction2(rng);
            const double s1 = sunlight_directional(f1, n);
            const double s2 = sunlight_directional(f2, n);
            const double s12 = sunlight_directional(add(f1, f2), n);
            if (s12 < s1 - 1e-6 || s12 > s1 + s2 + 1e-6) return false;
        }
        return true;
    });
    run_check(checks, "sunlight.mass_scaling", [&] {
        const GridDensity f = testing::random_blocks_field(rng, 48);
        const Direction n = testing::random_direction2(rng);
        const double lambda = 1.0 + 2.0 * testing::uniform(rng, 0.0, 1.0);
        return sunlight_directional(scale_mass(f, lambda), n) <=
               lambda * sunlight_directional(f, n) + 1e-9;
    });
    run_check(checks, "sunlight.hemisphere_weights", [&] {
        const IntensityModel eta = hemisphere_intensity(2, 180);
        double total = 0.0;
        for (const auto& [n, w] : eta.directions) {
            if (!(n.n[1] > 0.0)) return false;
            total += w;
        }
        return std::abs(total - M_PI * M_PI) <= 1e-9;
    });
    run_check(checks, "irrigation.two_atom_fixture", [&] {
        const DiscreteMeasure mu(
            2, {Atom{{1.0, 0.5}, 0.5}, Atom{{1.0, -0.5}, 0.5}});
        const IrrigationResult r = irrigation_cost(mu, 0.5);
        if (std::abs(r.cost - 1.5) > 1e-4) return false;
        for (const TreeNode& nd : r.tree.tree.nodes)
            if (nd.kind == NodeKind::Steiner &&
                dist(nd.pos, Point{0.5, 0.0}) > 1e-3)
                return false;
        return true;
    });
    run_check(checks, "irrigation.alpha1_exact", [&] {
        const DiscreteMeasure mu = testing::random_measure(rng, 2, 2, 4, 1.0);
        const IrrigationResult r = irrigation_cost(mu, 1.0);
        double straight = 0.0;
        for (const Atom& a : mu.atoms) straight += a.mass * norm(a.position);
        return std::abs(r.cost - straight) <= 1e-6;
    });
    run_check(checks, "irrigation.lower_bound", [&] {
        const DiscreteMeasure mu = testing::random_measure(rng, 2, 2, 5, 1.0);
        const double alpha = testing::uniform(rng, 0.3, 1.0);
        const IrrigationResult r = irrigation_cost(mu, alpha);
        return r.cost >= lower_bound(mu, alpha) - 1e-9;
    });
    run_check(checks, "harvest.constant_oracle", [&] {
        const DomainGrid2D grid(BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, 33, 33,
                                BoundaryKind::Neumann);
        const ReactionSpec reaction = ReactionSpec::constant(grid, 1.0, 1.0, 1.0);
        const MeasureCoefficient mc = MeasureCoefficient::constant(grid, 1.0);
        const HarvestSolution sol =
            solve(grid, reaction, mc, BoundaryKind::Neumann, 1e-8, 200);
        for (double u : sol.u)
            if (std::abs(u - 0.5) > 1e-7) return false;
        const double h1 = harvest_value(grid, sol, mc);
        const double h2 = harvest_flux_form(grid, sol, reaction);
        return std::abs(h1 - 0.5) <= 1e-6 && std::abs(h1 - h2) <= 1e-7;
    });
    run_check(checks, "harvest.comparison", [&] {
        const DomainGrid2D grid(BoxDomain{{0.0, 0.0}, {1.0, 1.0}}, 25, 25,
                                BoundaryKind::Neumann);
        const ReactionSpec reaction = ReactionSpec::constant(grid, 0.8, 1.0, 1.0);
        const double big = testing::uniform(rng, 0.5, 2.0);
        const MeasureCoefficient mb = MeasureCoefficient::constant(grid, big);
        const MeasureCoefficient ms =
            MeasureCoefficient::constant(grid, 0.5 * big);
        return verify_comparison(grid, reaction, ms, mb,
                                 BoundaryKind::Neumann, 1e-8)
            .passed;
    });

    json jchecks = json::array();
    int passed = 0, failed = 0;
    for (const Check& c : checks) {
        (c.passed ? passed : failed)++;
        json jc{{"name", c.name}, {"passed", c.passed}};
        if (!c.detail.empty()) jc["detail"] = c.detail;
        jchecks.push_back(jc);
    }
    return json{{"passed", passed}, {"failed", failed}, {"checks", jchecks}};
}

}  // namespace treeshape
