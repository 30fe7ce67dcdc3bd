// Command-line front end: analyze, synthesize, simulate, sweep.

#include "platoon/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Mixed-platoon analysis, H-infinity synthesis and simulation"};
    app.require_subcommand(1, 1);

    platoon::ExperimentConfig cfg;
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"analyze", "Stabilizability / detectability report"},
        {"synthesize", "Synthesize an H-infinity output-feedback controller"},
        {"simulate", "Nonlinear simulation, with the controller file named in the scenario if any"},
        {"sweep", "Braking pulse on each vehicle in turn, with and without the controller"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Scenario JSON file")->required();
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the scenario seed");
        sub->add_flag("--robust", cfg.robust, "Robust synthesis over the parameter ranges");
        sub->add_flag("--full-ring", cfg.full_ring, "Synthesize on the full ring model (no reduction)");
        sub->add_flag("--plot", cfg.plot, "Write SVG plots");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        std::cout << platoon::Json{{"kind", "ConfigError"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    for (CLI::App* sub : subs) {
        if (sub->parsed()) {
            cfg.mode = platoon::mode_from_string(sub->get_name());
            if (sub->count("--seed")) cfg.seed = seed;
        }
    }
    cfg.scenario_file = config_path;
    cfg.out_dir = out_dir;
    return platoon::run(cfg, std::cout, std::cerr);
}
