#pragma once

#include "sgmp/types.hpp"

#include <string>
#include <vector>

namespace sgmp {

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // how value compares with threshold when passing
    json detail = json::object();

    json to_json() const;
};

struct ExperimentResult {
    std::string experiment;
    json config;  // resolved config plus derived quantities
    std::vector<Check> checks;
    json summary = json::object();

    bool all_pass() const;
    const Check& check(const std::string& name) const;
    json to_json() const;
};

// fig2, phase-diagram, quadratic, nonconvex, coupling
const std::vector<std::string>& experiment_names();

// Accepts the short names above or the long tags (fig2_closed_form, relu_phase_diagram, quadratic_benchmark,
// nonconvex_benchmark, coupling_study).
std::string canonical_experiment(const std::string& name);

// scale is "desk" or "paper"; only the benchmarks differ between the two.
json default_config(const std::string& experiment, const std::string& scale = "desk");

// default_config merged with overrides (JSON merge patch).
json resolve_config(const std::string& experiment, const std::string& scale, const json& overrides);

// Writes CSVs, config.json and checks.json into out_dir when it is non-empty.
ExperimentResult run_experiment(const std::string& experiment, const json& config, const std::string& out_dir = "");

ExperimentResult run_fig2(const json& config, const std::string& out_dir = "");
ExperimentResult run_relu_phase_diagram(const json& config, const std::string& out_dir = "");
ExperimentResult run_quadratic_benchmark(const json& config, const std::string& out_dir = "");
ExperimentResult run_nonconvex_benchmark(const json& config, const std::string& out_dir = "");
ExperimentResult run_coupling_study(const json& config, const std::string& out_dir = "");

} // namespace sgmp
