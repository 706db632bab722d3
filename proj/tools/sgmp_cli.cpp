#include "sgmp/experiments.hpp"
#include "sgmp/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Stochastic gradient-momentum experiments"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string out, scale = "desk", config_path;
    bool print_config = false;

    for (const auto& name : sgmp::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--out", out, "output directory (CSV, config.json, checks.json)");
        sub->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--config", config_path, "JSON overrides merged into the defaults")->check(CLI::ExistingFile);
        sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string experiment = app.get_subcommands().front()->get_name();

    sgmp::json overrides = sgmp::json::object();
    try {
        if (!config_path.empty()) overrides = sgmp::io::read_json(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
    }
    if (seed_given) overrides["seed"] = seed;

    sgmp::ExperimentResult result;
    try {
        const sgmp::json config = sgmp::resolve_config(experiment, scale, overrides);
        if (print_config) {
            std::cout << config.dump(2) << "\n";
            return 0;
        }
        const auto t0 = std::chrono::steady_clock::now();
        result = sgmp::run_experiment(experiment, config, out);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (const auto& c : result.checks)
            std::printf("%s  %-48s %.6g %s %.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                        c.relation.c_str(), c.threshold);
        std::printf("%s: %zu checks, %s, %.1f s\n", experiment.c_str(), result.checks.size(),
                    result.all_pass() ? "all pass" : "some failed", secs);
        if (!out.empty()) std::printf("wrote %s\n", out.c_str());
    } catch (const std::exception& e) {
        std::cerr << experiment << ": " << e.what() << "\n";
        return 2;
    }
    return result.all_pass() ? 0 : 1;
}
