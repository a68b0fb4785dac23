#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treeshape/harvest.hpp"
#include "treeshape/serialize.hpp"
#include "treeshape/shape_optimizer.hpp"

namespace treeshape {

inline constexpr const char* kVersion = "0.1.0";

struct SunlightScenario {
    GridSpec grid;
    std::optional<DiscreteMeasure> measure;   // either a measure ...
    std::optional<double> density_constant;   // ... or a constant field
    double smear_radius = 0.0;
    IntensityModel light;
    std::optional<int> hemisphere_count;  // set when light came from the helper
    std::optional<double> obstacle_constant;
    bool export_planes = false;
};

struct IrrigateScenario {
    DiscreteMeasure measure;
    double alpha = 1.0;
    IrrigationOptions opts;
};

struct HarvestScenario {
    BoxDomain box;
    int nx = 33, ny = 33;
    double a = 1.0, b = 1.0, M = 1.0;
    BoundaryKind bc = BoundaryKind::Neumann;
    std::optional<double> coefficient_constant;
    std::optional<DiscreteMeasure> measure;
    double smear_radius = 0.0;
    double tol = 1e-8;
    int max_iter = 600;
};

struct BranchScenario {
    BranchProblem problem;
    long budget = 1000;
    std::optional<int> hemisphere_count;
    std::optional<double> obstacle_constant;
};

struct RootScenario {
    RootProblem problem;
    long budget = 1000;
    double reaction_a = 1.0;  // constant reaction field, echoed on round-trip
};

struct ScenarioConfig {
    std::string mode;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::optional<SunlightScenario> sunlight;
    std::optional<IrrigateScenario> irrigate;
    std::optional<HarvestScenario> harvest;
    std::optional<BranchScenario> branches;
    std::optional<RootScenario> roots;
};

struct ParseResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty() && config.has_value(); }
};

// Parses and fully validates; on failure, `errors` lists every problem found
// (key path plus reason), not just the first.
ParseResult parse_config(const std::filesystem::path& path);
ParseResult parse_config_json(const json& j);

// Inverse of parsing, with defaults filled in; parse(config_to_json(c))
// reproduces c.
json config_to_json(const ScenarioConfig& cfg);

struct RunManifest {
    json config_echo;
    std::string version;
    double wall_time_s = 0.0;
    std::vector<std::string> outputs;
    json key_results;
};

// Dispatches to the owning module and writes all outputs atomically under
// cfg.out_dir; the manifest is written last. Throws SolverError on solver
// non-convergence.
RunManifest run_scenario(const ScenarioConfig& cfg);

// Built-in property battery; returns {"passed": n, "failed": m, "checks": [..]}.
json run_selftest(std::uint64_t seed);

}  // namespace treeshape
