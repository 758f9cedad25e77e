#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fluidq/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fluidq: fluid equations of many-server queues with reneging"};
    app.require_subcommand(1);

    const char* modes[] = {"fluid", "invariant", "entropy", "renewal",
                           "multiclass", "des", "interchange"};
    std::string scenario_file;
    fluidq::RunOptions opts;
    double dt_override = 0.0;
    std::uint64_t seed_override = 0;
    bool have_dt = false, have_seed = false;

    for (const char* m : modes) {
        auto* sub = app.add_subcommand(m, std::string("run a ") + m + " scenario");
        sub->add_option("scenario", scenario_file, "scenario file (JSON)")->required();
        sub->add_option("--out-dir", opts.out_dir, "artifact output directory");
        sub->add_option("--dt-override", dt_override, "override the scenario time step")
            ->each([&](const std::string&) { have_dt = true; });
        sub->add_option("--seed-override", seed_override, "override the DES master seed")
            ->each([&](const std::string&) { have_seed = true; });
    }

    CLI11_PARSE(app, argc, argv);

    if (have_dt) opts.dt_override = dt_override;
    if (have_seed) opts.seed_override = seed_override;
    const std::string mode = app.get_subcommands().front()->get_name();
    return fluidq::run_scenario(mode, scenario_file, opts, std::cout);
}
