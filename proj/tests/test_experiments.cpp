#include "sgmp/experiments.hpp"
#include "sgmp/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sgmp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("sgmp_test_" + name);
    fs::remove_all(dir);
    return dir.string();
}

// strtod, unlike stod, accepts denormals
double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream s(line);
        std::string cell;
        while (std::getline(s, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

json small_quadratic() {
    return resolve_config("quadratic", "desk", {{"K", 6}, {"N", 5}, {"repetitions", 3}, {"iterations", 200}, {"batch", 2}});
}

} // namespace

TEST(Config, DefaultsAndOverrides) {
    auto q = default_config("quadratic");
    EXPECT_EQ(q["K"], 50);
    EXPECT_EQ(q["N"], 20);
    EXPECT_EQ(q["repetitions"], 20);
    auto paper = default_config("quadratic_benchmark", "paper");
    EXPECT_EQ(paper["K"], 500);
    EXPECT_EQ(paper["N"], 100);
    EXPECT_EQ(paper["repetitions"], 100);
    EXPECT_EQ(paper["experiment"], "quadratic");

    auto c = resolve_config("coupling", "desk", {{"seed", 9}, {"hsgmp", {{"skeletons", 3}}}});
    EXPECT_EQ(c["seed"], 9);
    EXPECT_EQ(c["hsgmp"]["skeletons"], 3);
    EXPECT_EQ(c["hsgmp"]["masses"].size(), 4u);

    EXPECT_THROW(default_config("cifar"), std::invalid_argument);
    EXPECT_THROW(default_config("fig2", "huge"), std::invalid_argument);
    for (const auto& name : experiment_names()) EXPECT_EQ(canonical_experiment(name), name);
    EXPECT_EQ(canonical_experiment("relu_phase_diagram"), "phase-diagram");
}

TEST(Fig2, OutputsAndPositionReading) {
    const auto dir = scratch("fig2");
    auto r = run_experiment("fig2", default_config("fig2"), dir);
    EXPECT_TRUE(r.check("caption_position_unit_mass").pass);
    EXPECT_TRUE(r.check("caption_position_decreasing_mass").pass);
    EXPECT_TRUE(r.check("exact_velocity_unit_mass").pass);
    // p_0 = 1 while the caption curve starts at 1 with slope 0, so the velocity reading cannot match
    EXPECT_FALSE(r.check("caption_velocity_unit_mass").pass);
    EXPECT_FALSE(r.all_pass());
    auto rows = read_csv(dir + "/fig2_q0_1_p0_0.csv");
    ASSERT_EQ(rows.size(), 1002u);
    EXPECT_EQ(rows[0][0], "t");
    EXPECT_EQ(rows[1][1], "1");
    EXPECT_TRUE(fs::exists(dir + "/config.json"));
    auto checks = io::read_json(dir + "/checks.json");
    EXPECT_EQ(checks["checks"].size(), 5u);
}

TEST(PhaseDiagram, SmallGridClassification) {
    auto c = resolve_config("phase-diagram", "desk",
                            {{"m_points", 4}, {"alpha_points", 4}, {"overestimation", 8.0}, {"horizon", 200.0}});
    const auto dir = scratch("phase");
    auto r = run_relu_phase_diagram(c, dir);
    EXPECT_TRUE(r.check("zero_mass_never_global").pass);
    EXPECT_DOUBLE_EQ(r.config["h"].get<double>(), 1.0 / 32.0);
    auto rows = read_csv(dir + "/phase_diagram.csv");
    ASSERT_EQ(rows.size(), 1u + 5 * 4);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"m", "alpha", "h", "class", "escape_indicator", "predicted", "q_final"}));
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double m = num(rows[k][0]), a = num(rows[k][1]);
        EXPECT_NEAR(num(rows[k][4]), a * a - 8 * m, 1e-12);
        EXPECT_EQ(rows[k][5], a * a - 8 * m < 0 ? "global" : "trapped");
        if (m == 0.0) EXPECT_NE(rows[k][3], "global");
        const double q = num(rows[k][6]);
        if (rows[k][3] == "global") EXPECT_NEAR(q, 0.5, 1e-3);
        if (rows[k][3] == "trapped") EXPECT_NEAR(q, 0.0, 1e-3);
    }
}

TEST(Quadratic, ReproducibleAndEchoesDerivedQuantities) {
    const auto a = scratch("quad_a"), b = scratch("quad_b");
    auto c = small_quadratic();
    auto ra = run_quadratic_benchmark(c, a);
    auto rb = run_quadratic_benchmark(c, b);
    for (const char* f : {"quadratic_distance.csv", "quadratic_final.csv", "config.json", "checks.json"})
        EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f)) << f;
    auto cfg = io::read_json(a + "/config.json");
    for (const char* key : {"L", "kappa", "lambda", "h0"}) {
        ASSERT_TRUE(cfg["derived"].contains(key)) << key;
        EXPECT_EQ(cfg["derived"][key].size(), 3u);
    }
    // h0 = alpha / (L / N) under the 1/N estimator scaling
    EXPECT_NEAR(cfg["derived"]["h0"][0].get<double>(), 5.0 / cfg["derived"]["L"][0].get<double>(), 1e-15);
    EXPECT_TRUE(ra.check("all_methods_decrease").pass);
    auto rows = read_csv(a + "/quadratic_distance.csv");
    EXPECT_EQ(rows.size(), 202u);
    EXPECT_EQ(rows[0].size(), 1u + 2 * 5);
    // every method starts from the same point
    for (std::size_t k = 3; k < rows[1].size(); k += 2) EXPECT_EQ(rows[1][k], rows[1][1]);

    c["seed"] = 2;
    const auto d = scratch("quad_d");
    run_quadratic_benchmark(c, d);
    EXPECT_NE(slurp(a + "/quadratic_final.csv"), slurp(d + "/quadratic_final.csv"));
}

TEST(Quadratic, RejectsZeroRepetitions) {
    auto c = small_quadratic();
    c["repetitions"] = 0;
    EXPECT_THROW(run_quadratic_benchmark(c), std::invalid_argument);
}

TEST(Quadratic, DivergentRunsAreRecorded) {
    auto c = small_quadratic();
    c["h0"] = 1e8;
    auto r = run_quadratic_benchmark(c);
    EXPECT_GT(r.summary["final_distance"]["sgd"]["diverged"].get<int>(), 0);
}

TEST(Nonconvex, BoundedBelowAndFiles) {
    auto c = resolve_config("nonconvex", "desk", {{"K", 5}, {"N", 4}, {"repetitions", 2}, {"iterations", 300}, {"batch", 2}});
    const auto dir = scratch("nonconvex");
    auto r = run_nonconvex_benchmark(c, dir);
    EXPECT_TRUE(r.check("objective_bounded_below").pass);
    EXPECT_EQ(r.check("objective_bounded_below").detail["non_finite_values"], 0);
    auto cfg = io::read_json(dir + "/config.json");
    EXPECT_EQ(cfg["derived"]["objective_lower_bound"].size(), 2u);
    for (double lb : cfg["derived"]["objective_lower_bound"].get<std::vector<double>>()) EXPECT_LT(lb, 0.0);
    EXPECT_EQ(read_csv(dir + "/nonconvex_final.csv").size(), 1u + 2 * 5);
}

TEST(Coupling, SmallEnsembles) {
    auto c = resolve_config("coupling", "desk",
                            {{"hsgmp", {{"skeletons", 8}, {"samples", 50}}},
                             {"dmsgmp", {{"skeletons", 6}}},
                             {"ddsgmp", {{"skeletons", 4}}}});
    const auto dir = scratch("coupling");
    auto r = run_coupling_study(c, dir);
    EXPECT_TRUE(r.check("sgp_self_coupling_zero").pass);
    EXPECT_TRUE(r.check("fixed_sample_bound").pass);
    for (const char* f : {"coupling_fixed_sample.csv", "coupling_hsgmp.csv", "coupling_hsgmp_time.csv",
                          "coupling_dmsgmp.csv", "coupling_ddsgmp.csv"})
        EXPECT_TRUE(fs::exists(dir + "/" + f)) << f;
    auto ladder = read_csv(dir + "/coupling_hsgmp.csv");
    ASSERT_EQ(ladder.size(), 5u);
    EXPECT_EQ(ladder[1][1], "1");  // nu = m^0
    auto time = read_csv(dir + "/coupling_hsgmp_time.csv");
    ASSERT_EQ(time.size(), 52u);
    for (std::size_t k = 1; k < time[1].size(); ++k) EXPECT_EQ(time[1][k], "0");

    const auto again_dir = scratch("coupling_again");
    auto again = run_coupling_study(c, again_dir);
    for (const char* f : {"coupling_hsgmp_time.csv", "coupling_dmsgmp.csv", "coupling_ddsgmp.csv"})
        EXPECT_EQ(slurp(dir + "/" + f), slurp(again_dir + "/" + f)) << f;
    EXPECT_EQ(again.to_json().dump(), r.to_json().dump());
}
