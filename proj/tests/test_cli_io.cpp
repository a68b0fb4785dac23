#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "treeshape/scenario.hpp"
#include "treeshape/testing.hpp"

using namespace treeshape;
namespace fs = std::filesystem;

namespace {

json minimal_branch_config() {
    return json{{"mode", "optimize-branches"},
                {"omega", {{"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}}},
                {"smear_radius", 0.12},
                {"light", {{"hemisphere_count", 4}}},
                {"alpha", 0.75},
                {"c", 1.0},
                {"kappa0", 1.0}};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("parse_config: minimal branch config gets defaults") {
    const ParseResult res = parse_config_json(minimal_branch_config());
    REQUIRE(res.ok());
    const ScenarioConfig& cfg = *res.config;
    CHECK(cfg.mode == "optimize-branches");
    CHECK(cfg.seed == 0);
    CHECK(cfg.out_dir == "out");
    REQUIRE(cfg.branches.has_value());
    CHECK(cfg.branches->budget == 1000);
    CHECK(cfg.branches->problem.max_atoms == 12);
    CHECK(cfg.branches->problem.grid.resolution == std::vector<int>{48, 48});
}

TEST_CASE("parse_config: alpha constraint failure names the rule") {
    json j = minimal_branch_config();
    j["alpha"] = 0.0;
    const ParseResult res = parse_config_json(j);
    CHECK(!res.ok());
    REQUIRE(res.errors.size() >= 1);
    bool found = false;
    for (const std::string& e : res.errors)
        if (e.find("alpha") != std::string::npos &&
            e.find("1 - 1/(d-1)") != std::string::npos)
            found = true;
    CHECK(found);
}

TEST_CASE("parse_config: unknown keys are reported with their path") {
    json j = minimal_branch_config();
    j["smear"] = 0.1;
    j["light"]["count"] = 3;
    const ParseResult res = parse_config_json(j);
    CHECK(!res.ok());
    bool top = false, nested = false;
    for (const std::string& e : res.errors) {
        if (e.rfind("smear:", 0) == 0) top = true;
        if (e.rfind("light.count:", 0) == 0) nested = true;
    }
    CHECK(top);
    CHECK(nested);
}

TEST_CASE("parse_config: collects every error, not just the first") {
    json j = minimal_branch_config();
    j["alpha"] = -1.0;
    j["c"] = 0.0;
    j["kappa0"] = "one";
    const ParseResult res = parse_config_json(j);
    CHECK(res.errors.size() >= 3);
}

TEST_CASE("parse_config: missing keys and type errors carry key paths") {
    const ParseResult res = parse_config_json(json{{"mode", "harvest"}});
    CHECK(!res.ok());
    bool domain = false, reaction = false;
    for (const std::string& e : res.errors) {
        if (e.rfind("domain:", 0) == 0) domain = true;
        if (e.rfind("reaction:", 0) == 0) reaction = true;
    }
    CHECK(domain);
    CHECK(reaction);
}

TEST_CASE("config round-trip: parse(serialize(cfg)) == cfg") {
    std::mt19937_64 rng(51);
    for (int i = 0; i < 8; ++i) {
        json j;
        switch (i % 4) {
            case 0: j = minimal_branch_config(); break;
            case 1:
                j = json{{"mode", "sunlight"},
                         {"seed", static_cast<long long>(rng() % 1000)},
                         {"grid",
                          {{"lo", {0.0, 0.0}},
                           {"hi", {1.0, 1.0}},
                           {"resolution", {32, 32}}}},
                         {"density_constant", testing::uniform(rng, 0.1, 2.0)},
                         {"light", {{"hemisphere_count", 3}}}};
                break;
            case 2:
                j = json{{"mode", "harvest"},
                         {"domain", {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}}},
                         {"nodes", {17, 17}},
                         {"reaction", {{"a", 1.0}, {"b", 1.0}, {"M", 1.0}}},
                         {"bc", "neumann"},
                         {"coefficient_constant", 1.0}};
                break;
            case 3:
                j = json{{"mode", "irrigate"},
                         {"measure",
                          {{"d", 2},
                           {"atoms",
                            json::array({json{{"x", {1.0, 0.5}}, {"m", 0.5}},
                                         json{{"x", {1.0, -0.5}}, {"m", 0.5}}})}}},
                         {"alpha", 0.5}};
                break;
        }
        const ParseResult first = parse_config_json(j);
        REQUIRE(first.ok());
        const json dumped = config_to_json(*first.config);
        const ParseResult second = parse_config_json(dumped);
        REQUIRE(second.ok());
        CHECK(config_to_json(*second.config) == dumped);
    }
}

TEST_CASE("measure json round-trip") {
    std::mt19937_64 rng(52);
    const DiscreteMeasure mu = testing::random_measure(rng, 2, 1, 6, 1.0);
    const DiscreteMeasure back = measure_from_json(measure_to_json(mu));
    REQUIRE(back.atoms.size() == mu.atoms.size());
    for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
        CHECK(back.atoms[i].position == mu.atoms[i].position);
        CHECK(back.atoms[i].mass == mu.atoms[i].mass);
    }
    CHECK_THROWS_AS(measure_from_json(json{{"atoms", json::array()}}),
                    std::invalid_argument);
}

namespace {

bool csv_is_rectangular(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::size_t fields = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t n = std::count(line.begin(), line.end(), ',') + 1;
        if (fields == 0) fields = n;
        if (n != fields) return false;
    }
    return fields > 0;
}

}  // namespace

TEST_CASE("grid csv round-trip, rectangular output") {
    std::mt19937_64 rng(53);
    const GridDensity f = testing::random_blocks_field(rng, 16);
    const std::string csv = grid_to_csv(f);
    CHECK(csv_is_rectangular(csv));
    const GridDensity back = grid_from_csv(grid_header_json(f), csv);
    CHECK(back.spec.resolution == f.spec.resolution);
    for (std::size_t i = 0; i < f.cells.size(); ++i)
        CHECK(back.cells[i] == f.cells[i]);

    const PlaneDensity phi = project_density(
        f, Direction::from_angle(0.9), f.spec.min_cell_width());
    CHECK(csv_is_rectangular(plane_to_csv(phi)));

    OptReport rep;
    rep.trace = {0.0, 0.5, 0.5};
    CHECK(csv_is_rectangular(trace_to_csv(rep)));
}

TEST_CASE("render_svg: fixtures") {
    // Single edge.
    IrrigationTree t;
    t.dim = 2;
    t.nodes.push_back({0, {0.0, 0.0}, NodeKind::Root});
    t.nodes.push_back({1, {1.0, 0.0}, NodeKind::Leaf});
    t.edges.push_back({0, 1});
    t.leaf_atoms[1] = Atom{{1.0, 0.0}, 1.0};
    const std::string one = render_svg(compute_fluxes(t), 0.5);
    CHECK(one.find("<svg") != std::string::npos);
    CHECK(std::count(one.begin(), one.end(), '\n') > 2);
    // One tree edge plus two axis lines.
    std::size_t lines = 0;
    for (std::size_t p = one.find("<line"); p != std::string::npos;
         p = one.find("<line", p + 1))
        ++lines;
    CHECK(lines == 3);

    // Empty measure: blank canvas with axes only.
    const GridDensity zero(GridSpec{BoxDomain{{-1, -1}, {1, 1}}, {8, 8}}, 0.0);
    const std::string blank = render_svg(zero, nullptr, 0.5);
    CHECK(blank.find("<rect") == std::string::npos);
    CHECK(blank.find("<line") != std::string::npos);

    // Fixture tree: branch strokes thinner than the trunk, ratio 0.5^0.5.
    const DiscreteMeasure pair(
        2, {Atom{{1.0, 0.5}, 0.5}, Atom{{1.0, -0.5}, 0.5}});
    const IrrigationResult r = irrigation_cost(pair, 0.5);
    const std::string svg = render_svg(r.tree, 0.5);
    std::vector<double> widths;
    for (std::size_t p = svg.find("stroke-width=\""); p != std::string::npos;
         p = svg.find("stroke-width=\"", p + 1)) {
        const std::size_t q = svg.find('"', p + 14);
        widths.push_back(std::stod(svg.substr(p + 14, q - p - 14)));
    }
    std::sort(widths.begin(), widths.end());
    REQUIRE(widths.size() >= 3);
    const double trunk = widths.back();
    const double branch = widths[widths.size() - 2];
    CHECK(branch / trunk == doctest::Approx(std::pow(0.5, 0.5)).epsilon(1e-6));

    // d=3 content is rejected.
    IrrigationTree t3 = t;
    t3.dim = 3;
    for (TreeNode& nd : t3.nodes) nd.pos.push_back(0.0);
    t3.leaf_atoms[1].position.push_back(0.0);
    FluxAnnotatedTree f3;
    f3.tree = t3;
    f3.edge_flux = {1.0};
    CHECK_THROWS_AS(render_svg(f3, 0.5), std::invalid_argument);
}

TEST_CASE("atomic_write leaves no partial files behind") {
    TempDir tmp("treeshape_atomic_test");
    const fs::path target = tmp.path / "nested" / "file.txt";
    atomic_write(target, "payload");
    CHECK(slurp(target) == "payload");
    for (const auto& entry : fs::directory_iterator(target.parent_path()))
        CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("run_scenario: sunlight fixture reproduces the closed form") {
    TempDir tmp("treeshape_sunlight_run");
    json j{{"mode", "sunlight"},
           {"out_dir", (tmp.path / "out").string()},
           {"grid",
            {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}, {"resolution", {64, 64}}}},
           {"density_constant", 1.0},
           {"light",
            {{"directions",
              json::array({json{{"n", {0.0, -1.0}}, {"weight", 1.0}}})}}}};
    const ParseResult res = parse_config_json(j);
    REQUIRE(res.ok());
    const RunManifest man = run_scenario(*res.config);
    CHECK(man.key_results.at("S").get<double>() ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-3));
    CHECK(fs::exists(tmp.path / "out" / "sunlight_result.json"));
    CHECK(fs::exists(tmp.path / "out" / "manifest.json"));

    // Same config twice: byte-identical result JSON.
    const std::string first = slurp(tmp.path / "out" / "sunlight_result.json");
    run_scenario(*res.config);
    CHECK(slurp(tmp.path / "out" / "sunlight_result.json") == first);
}

TEST_CASE("run_scenario: selftest mode reports pass/fail counts") {
    TempDir tmp("treeshape_selftest_run");
    ScenarioConfig cfg;
    cfg.mode = "selftest";
    cfg.out_dir = (tmp.path / "out").string();
    const RunManifest man = run_scenario(cfg);
    CHECK(man.key_results.at("failed").get<int>() == 0);
    CHECK(man.key_results.at("passed").get<int>() >= 10);
}

TEST_CASE("run_scenario: harvest non-convergence surfaces as SolverError") {
    ScenarioConfig cfg;
    cfg.mode = "harvest";
    cfg.out_dir = (fs::temp_directory_path() / "treeshape_fail_run").string();
    HarvestScenario h;
    h.box = BoxDomain{{0.0, 0.0}, {1.0, 1.0}};
    h.nx = h.ny = 17;
    h.a = 1.0;
    h.b = 1.0;
    h.M = 1.0;
    h.bc = BoundaryKind::Neumann;
    h.coefficient_constant = 4.0;
    h.tol = 1e-12;
    h.max_iter = 1;
    cfg.harvest = h;
    CHECK_THROWS_AS(run_scenario(cfg), SolverError);
    fs::remove_all(cfg.out_dir);
}

#ifdef TREESHAPE_CLI_PATH
TEST_CASE("CLI end to end: determinism and exit codes") {
    TempDir tmp("treeshape_cli_run");
    const std::string cli = TREESHAPE_CLI_PATH;

    json cfg = minimal_branch_config();
    cfg["budget"] = 40;
    cfg["grid"] = json{{"lo", {-1.0, -1.0}},
                       {"hi", {1.0, 1.0}},
                       {"resolution", {24, 24}}};
    cfg["smear_radius"] = 0.2;
    const fs::path cfg_path = tmp.path / "branch.json";
    atomic_write(cfg_path, cfg.dump(2));

    const fs::path out1 = tmp.path / "run1";
    const fs::path out2 = tmp.path / "run2";
    const std::string base = cli + " optimize-branches --config " +
                             cfg_path.string() + " --seed 9 --out ";
    CHECK(std::system((base + out1.string() + " > /dev/null").c_str()) == 0);
    CHECK(std::system((base + out2.string() + " > /dev/null").c_str()) == 0);
    CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
    CHECK(slurp(out1 / "trace.csv") == slurp(out2 / "trace.csv"));
    CHECK(slurp(out1 / "best_measure.json") == slurp(out2 / "best_measure.json"));

    // Validation failure: exit code 2.
    json bad = cfg;
    bad["alpha"] = 0.0;
    const fs::path bad_path = tmp.path / "bad.json";
    atomic_write(bad_path, bad.dump(2));
    const int rc = std::system((cli + " optimize-branches --config " +
                                bad_path.string() + " 2> /dev/null")
                                   .c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // Mode/subcommand mismatch is a validation failure too.
    const int rc2 = std::system(
        (cli + " sunlight --config " + cfg_path.string() + " 2> /dev/null")
            .c_str());
    CHECK(WEXITSTATUS(rc2) == 2);

    // Solver non-convergence: exit code 3.
    json stuck{{"mode", "harvest"},
               {"out_dir", (tmp.path / "stuck").string()},
               {"domain", {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}}},
               {"nodes", {17, 17}},
               {"reaction", {{"a", 1.0}, {"b", 1.0}, {"M", 1.0}}},
               {"bc", "neumann"},
               {"coefficient_constant", 4.0},
               {"pde", {{"tol", 1e-12}, {"max_iter", 1}}}};
    const fs::path stuck_path = tmp.path / "stuck.json";
    atomic_write(stuck_path, stuck.dump(2));
    const int rc3 = std::system(
        (cli + " harvest --config " + stuck_path.string() +
         " > /dev/null 2> /dev/null")
            .c_str());
    CHECK(WEXITSTATUS(rc3) == 3);
}
#endif
