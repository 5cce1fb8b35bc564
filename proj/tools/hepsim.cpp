// hepsim: replays a scenario file through the scheduler on a virtual clock.

#include <CLI11.hpp>
#include <iostream>

#include "hepinfo/simharness.hpp"

int main(int argc, char** argv) {
    using namespace hepinfo;

    std::string scenario_path;
    CLI::App app{"hepsim - deterministic scheduler simulation"};
    app.require_subcommand(1);
    auto* run_cmd = app.add_subcommand("run", "run a scenario file");
    run_cmd->add_option("scenario", scenario_path)->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    auto scenario = sim::load_scenario(scenario_path);
    if (!scenario) {
        const auto& e = scenario.error();
        std::cerr << "hepsim: invalid scenario";
        if (e.line) std::cerr << " (line " << e.line << ")";
        std::cerr << ": " << e.message << "\n";
        return 2;
    }
    auto log = sim::run(*scenario);
    if (!log) {
        std::cerr << "hepsim: invalid scenario: " << log.error().message << "\n";
        return 2;
    }
    std::cout << sim::render(*log, sim::balance_report(*log));
    return 0;
}
