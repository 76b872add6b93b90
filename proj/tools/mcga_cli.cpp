// Experiment runner: `mcga run exp1|exp2|custom [options]`. Parameters come
// from per-experiment defaults, then an optional config file, then flags.
// All outputs land in --out as plot-ready CSV plus summary.json, which embeds
// the resolved configuration and can itself be passed back via --config.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcga/experiments.hpp"

namespace {

struct CliFlags {
    std::string experiment;
    std::string config_file;
    std::vector<std::string> overrides;  // key=value captured from flags
};

void add_override(mcga::ConfigInput& input, const std::string& key, const std::string& value) {
    input.set(key, value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle Monte Carlo solver for the electric field E = -grad phi"};
    app.require_subcommand(1);

    CLI::App* run = app.add_subcommand("run", "run an experiment and write result files");

    std::string experiment;
    run->add_option("experiment", experiment, "exp1, exp2 or custom")->required();

    std::string config_file;
    run->add_option("--config", config_file,
                    "config file (flat key=value, or JSON such as an emitted summary.json)");

    // Option name maps to the config key it overrides.
    std::vector<std::pair<std::string, std::string>> overrides;
    const auto add_opt = [&](const std::string& flag, const std::string& key,
                             const std::string& help) {
        run->add_option_function<std::string>(
               flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
               help)
            ->expected(1);
    };
    add_opt("--seed", "seed", "root RNG seed (all randomness derives from it)");
    add_opt("--jobs", "jobs", "worker threads (0 = hardware concurrency)");
    add_opt("--scale", "scale", "multiply particle and replicate counts (desk-scale runs)");
    add_opt("--mode", "mode", "coupling handling: neglect, exact or both");
    add_opt("--out", "out_dir", "output directory");
    add_opt("--particles", "n", "particles per simulation");
    add_opt("--replicates", "replicates", "independent replicate runs");
    add_opt("--resolutions", "resolutions", "comma-separated grid sizes (exp2)");
    add_opt("--grid", "grid_m", "cells per dimension (exp1/custom)");
    add_opt("--dt", "dt", "time step");
    add_opt("--t0", "t0", "start time");
    add_opt("--tstar", "t_star", "end time");
    add_opt("--diffusion", "diffusion_d", "diffusion coefficient D");
    add_opt("--n-per-cell", "n_per_cell", "injected particles per cell per step");
    add_opt("--w-cap", "w_cap", "roulette threshold as a fraction of the median weight");
    add_opt("--pop-cap", "pop_cap_factor",
            "run population control only above this multiple of N (0 = every step)");
    add_opt("--trailing-window", "trailing_window", "average estimates over the last W steps");
    add_opt("--floor", "relerr_floor", "relative-error denominator floor");

    bool emit_snapshots = false;
    run->add_flag("--emit-snapshots", emit_snapshots, "dump final particle ensembles (debugging)");

    try {
        app.parse(argc, argv);

        mcga::ConfigInput input;
        if (!config_file.empty()) input = mcga::load_config_file(config_file);
        input.set("experiment", experiment);
        for (const auto& [key, value] : overrides) add_override(input, key, value);
        if (emit_snapshots) input.set("emit_snapshots", "1");

        const mcga::ExperimentConfig cfg = mcga::resolve_config(input);

        mcga::Provenance prov;
        for (int k = 0; k < argc; ++k) prov.argv.emplace_back(argv[k]);
        prov.config_file = config_file;
        prov.requested_scale = cfg.requested_scale;

        if (cfg.experiment == "exp1") {
            mcga::run_experiment1(cfg, prov);
        } else if (cfg.experiment == "exp2") {
            mcga::run_experiment2(cfg, prov);
        } else {
            mcga::run_custom(cfg, prov);
        }
        std::printf("wrote results to %s\n", cfg.out_dir.c_str());
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
