#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "treeshape/scenario.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "treeshape: sunlight, harvest and ramified-irrigation functionals "
        "on discrete and gridded measures, with branch/root shape optimizers"};
    app.require_subcommand(1);

    const char* modes[] = {"sunlight",          "irrigate",
                           "harvest",           "optimize-branches",
                           "optimize-roots",    "selftest"};
    std::string config_path;
    std::optional<long long> seed_override;
    std::optional<std::string> out_override;
    for (const char* mode : modes) {
        CLI::App* sub = app.add_subcommand(mode, std::string("run a ") + mode +
                                                     " scenario");
        CLI::Option* opt =
            sub->add_option("--config", config_path, "scenario config (JSON)");
        if (std::string(mode) != "selftest") opt->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_override, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string mode = app.get_subcommands().front()->get_name();

    treeshape::ScenarioConfig cfg;
    if (config_path.empty()) {
        cfg.mode = "selftest";
    } else {
        const treeshape::ParseResult parsed = treeshape::parse_config(config_path);
        if (!parsed.ok()) {
            std::fprintf(stderr, "config validation failed:\n");
            for (const std::string& e : parsed.errors)
                std::fprintf(stderr, "  %s\n", e.c_str());
            return kExitValidation;
        }
        cfg = *parsed.config;
        if (cfg.mode != mode) {
            std::fprintf(stderr,
                         "config mode \"%s\" does not match subcommand \"%s\"\n",
                         cfg.mode.c_str(), mode.c_str());
            return kExitValidation;
        }
    }
    if (seed_override) cfg.seed = static_cast<std::uint64_t>(*seed_override);
    if (out_override) cfg.out_dir = *out_override;

    try {
        const treeshape::RunManifest man = treeshape::run_scenario(cfg);
        std::printf("%s\n", man.key_results.dump(2).c_str());
        if (cfg.mode == "selftest" &&
            man.key_results.value("failed", 0) > 0)
            return 1;
        return 0;
    } catch (const treeshape::SolverError& e) {
        std::fprintf(stderr, "solver did not converge: %s (residual %g)\n",
                     e.what(), e.residual());
        return kExitNoConvergence;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
