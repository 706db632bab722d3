#include "sgmp/experiments.hpp"

#include "sgmp/index_process.hpp"
#include "sgmp/io.hpp"
#include "sgmp/lyapunov.hpp"
#include "sgmp/optimizers.hpp"
#include "sgmp/parallel.hpp"
#include "sgmp/problems.hpp"
#include "sgmp/schedules.hpp"
#include "sgmp/simulator.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sgmp {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Check make_check(std::string name, double value, std::string relation, double threshold, json detail = json::object()) {
    Check c;
    c.name = std::move(name);
    c.value = value;
    c.threshold = threshold;
    c.relation = relation;
    c.detail = std::move(detail);
    if (relation == "<")
        c.pass = value < threshold;
    else if (relation == "<=")
        c.pass = value <= threshold;
    else if (relation == ">")
        c.pass = value > threshold;
    else if (relation == ">=")
        c.pass = value >= threshold;
    else if (relation == "==")
        c.pass = value == threshold;
    else
        throw std::logic_error("unknown relation " + relation);
    return c;
}

std::vector<double> finite_only(const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
    v = finite_only(v);
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(const std::vector<double>& v) { return quantile(v, 0.5); }

double mean(const std::vector<double>& v) {
    auto f = finite_only(v);
    if (f.empty()) return kNaN;
    return std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
}

double stddev(const std::vector<double>& v) {
    auto f = finite_only(v);
    if (f.size() < 2) return 0.0;
    const double m = mean(f);
    double s = 0.0;
    for (double x : f) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(f.size() - 1));
}

std::string mass_label(double m) { return "m" + io::format_number(m); }

Vector gaussian_vector(int K, double stddev, Rng& rng) {
    std::normal_distribution<double> n(0.0, stddev);
    Vector v(K);
    for (int k = 0; k < K; ++k) v[k] = n(rng);
    return v;
}

std::vector<double> linspace(double a, double b, int points) {
    std::vector<double> v;
    for (int k = 0; k < points; ++k) v.push_back(points == 1 ? a : a + (b - a) * k / (points - 1));
    return v;
}

Rng seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return Rng(seq);
}

// Value at an exact sample time; the grids are built from the same expression so equality is safe.
double value_at(const std::vector<double>& times, const std::vector<double>& values, double t) {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t) throw std::logic_error("sample time not on record grid");
    return values[static_cast<std::size_t>(it - times.begin())];
}

void finish(ExperimentResult& r, const std::string& out_dir) {
    if (out_dir.empty()) return;
    io::ensure_directory(out_dir);
    io::write_json(io::join(out_dir, "config.json"), r.config);
    io::write_json(io::join(out_dir, "checks.json"), r.to_json());
}

std::uint64_t seed_of(const json& c) { return c.at("seed").get<std::uint64_t>(); }

} // namespace

json Check::to_json() const {
    return {{"name", name}, {"pass", pass}, {"value", value}, {"relation", relation}, {"threshold", threshold},
            {"detail", detail}};
}

bool ExperimentResult::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check& ExperimentResult::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no check named " + name);
}

json ExperimentResult::to_json() const {
    json cs = json::array();
    for (const auto& c : checks) cs.push_back(c.to_json());
    return {{"experiment", experiment}, {"all_pass", all_pass()}, {"checks", cs}, {"summary", summary}};
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"fig2", "phase-diagram", "quadratic", "nonconvex", "coupling"};
    return names;
}

std::string canonical_experiment(const std::string& name) {
    static const std::vector<std::pair<std::string, std::string>> aliases{{"fig2_closed_form", "fig2"},
                                                                          {"relu_phase_diagram", "phase-diagram"},
                                                                          {"quadratic_benchmark", "quadratic"},
                                                                          {"nonconvex_benchmark", "nonconvex"},
                                                                          {"coupling_study", "coupling"}};
    for (const auto& [alias, canon] : aliases)
        if (name == alias || name == canon) return canon;
    throw std::invalid_argument("unknown experiment " + name);
}

json default_config(const std::string& name, const std::string& scale) {
    const std::string experiment = canonical_experiment(name);
    if (scale != "desk" && scale != "paper") throw std::invalid_argument("scale must be desk or paper");
    const bool paper = scale == "paper";
    json c;
    if (experiment == "fig2") {
        c = {{"horizon", 10.0}, {"samples", 1000}, {"tolerance", 1e-6}, {"abs_tol", 1e-9}, {"rel_tol", 1e-9}};
    } else if (experiment == "phase-diagram") {
        c = {{"m_range", {0.05, 3.0}},
             {"m_points", 20},
             {"alpha_range", {0.2, 4.0}},
             {"alpha_points", 20},
             {"zero_mass_row", true},
             {"L0", 4.0},
             {"overestimation", 64.0},
             {"horizon", 400.0},
             {"q0", -1.0},
             {"p0", 0.0},
             {"class_tol", 1e-3},
             {"band", 0.5},
             {"min_agreement", 0.95},
             {"max_undecided", 0.1}};
    } else if (experiment == "quadratic") {
        c = {{"K", paper ? 500 : 50},
             {"N", paper ? 100 : 20},
             {"eig_range", {0.05, 15.0}},
             {"b_stddev", 2.0},
             {"repetitions", paper ? 100 : 20},
             {"iterations", 2000},
             {"batch", 10},
             {"alpha", 1.0},
             {"paper_scaling", true},
             {"h0", nullptr},
             {"masses", {1.0, 0.1, 0.01}},
             {"geometric", {{"m0", 0.1}, {"ratio", 0.995}}},
             {"moderate_mass", 0.1}};
    } else if (experiment == "nonconvex") {
        c = {{"K", paper ? 500 : 50},
             {"N", paper ? 100 : 20},
             {"eig_range", {0.05, 15.0}},
             {"b_stddev", 2.0},
             {"repetitions", paper ? 100 : 20},
             {"iterations", 2000},
             {"batch", 5},
             {"alpha", 1.0},
             {"paper_scaling", true},
             {"h", 0.01},
             {"masses", {1.0, 0.1, 0.01}},
             {"geometric", {{"m0", 0.1}, {"ratio", 0.995}}},
             {"early_fraction", 0.1}};
    } else if (experiment == "coupling") {
        c = {{"gamma", 1.0},
             {"problem", {{"K", 10}, {"N", 5}, {"eig_range", {0.05, 15.0}}, {"b_stddev", 2.0}}},
             {"q0_stddev", 1.0},
             {"fixed_sample",
              {{"enabled", true},
               {"problem", {{"K", 10}, {"N", 5}, {"eig_range", {0.1, 0.3}}, {"b_stddev", 1.0}}},
               {"component", 0},
               {"masses", {0.1, 0.05, 0.025}},
               {"horizon", 10.0},
               {"p0_stddev", 1.0},
               {"ratio_range", {1.6, 2.4}}}},
             {"hsgmp",
              {{"enabled", true},
               {"masses", {0.3, 0.1, 0.03, 0.01}},
               {"delta", 0.0},
               {"horizon", 5.0},
               {"skeletons", 200},
               {"samples", 500}}},
             {"dmsgmp",
              {{"enabled", true},
               {"m0", 0.1},
               {"lambda", 0.1},
               {"horizon", 20.0},
               {"skeletons", 100},
               {"compare_times", {5.0, 20.0}},
               {"samples", 200}}},
             {"ddsgmp",
              {{"enabled", true},
               {"m0", 0.1},
               {"lambda", 0.05},
               {"horizon", 40.0},
               {"skeletons", 100},
               {"compare_times", {10.0, 40.0}},
               {"samples", 40}}}};
    } else {
        throw std::invalid_argument("unknown experiment " + experiment);
    }
    c["experiment"] = experiment;
    c["scale"] = scale;
    c["seed"] = 1;
    return c;
}

json resolve_config(const std::string& experiment, const std::string& scale, const json& overrides) {
    json c = default_config(experiment, scale);
    if (!overrides.is_null()) c.merge_patch(overrides);
    c["experiment"] = canonical_experiment(experiment);
    c["scale"] = scale;
    return c;
}

ExperimentResult run_experiment(const std::string& name, const json& config, const std::string& out_dir) {
    const std::string experiment = canonical_experiment(name);
    if (experiment == "fig2") return run_fig2(config, out_dir);
    if (experiment == "phase-diagram") return run_relu_phase_diagram(config, out_dir);
    if (experiment == "quadratic") return run_quadratic_benchmark(config, out_dir);
    if (experiment == "nonconvex") return run_nonconvex_benchmark(config, out_dir);
    if (experiment == "coupling") return run_coupling_study(config, out_dir);
    throw std::invalid_argument("unknown experiment " + experiment);
}

// -- Closed-form flows --------------------------------------------------------

ExperimentResult run_fig2(const json& c, const std::string& out_dir) {
    ExperimentResult r;
    r.experiment = "fig2";
    r.config = c;
    const double T = c.at("horizon"), tol = c.at("tolerance");
    IntegratorOptions o;
    o.samples = c.at("samples");
    o.abs_tol = c.at("abs_tol");
    o.rel_tol = c.at("rel_tol");

    auto prob = make_single_quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
    auto unit = SystemSpec::underdamped(MassSchedule::constant(1.0), 1.0);
    auto decr = SystemSpec::underdamped(MassSchedule::rational(1.0, 1.0), 1.0);
    auto state = [](double q, double p) { return PhaseState{Vector::Constant(1, q), Vector::Constant(1, p), 0.0, -1}; };
    const double w = std::sqrt(3.0) / 2.0;
    auto caption_unit = [&](double t) { return std::exp(-t / 2) * (std::sin(w * t) / std::sqrt(3.0) + std::cos(w * t)); };
    auto caption_decr = [](double t) { return std::exp(-t * t / 2); };
    auto exact_velocity = [&](double t) { return std::exp(-t / 2) * (std::cos(w * t) - std::sin(w * t) / std::sqrt(3.0)); };

    // the displayed initial value problem and the one whose position the displayed curves describe
    auto vu = integrate(unit, *prob, state(0.0, 1.0), T, o);
    auto vd = integrate(decr, *prob, state(0.0, 1.0), T, o);
    auto pu = integrate(unit, *prob, state(1.0, 0.0), T, o);
    auto pd = integrate(decr, *prob, state(1.0, 0.0), T, o);

    double e_vu = 0, e_vd = 0, e_pu = 0, e_pd = 0, e_exact = 0;
    for (std::size_t s = 0; s < vu.size(); ++s) {
        const double t = vu.t[s];
        e_vu = std::max(e_vu, std::abs(vu.p[s][0] - caption_unit(t)));
        e_vd = std::max(e_vd, std::abs(vd.p[s][0] - caption_decr(t)));
        e_pu = std::max(e_pu, std::abs(pu.q[s][0] - caption_unit(t)));
        e_pd = std::max(e_pd, std::abs(pd.q[s][0] - caption_decr(t)));
        e_exact = std::max(e_exact, std::abs(vu.p[s][0] - exact_velocity(t)));
    }
    r.checks.push_back(make_check("caption_velocity_unit_mass", e_vu, "<", tol, {{"q0", 0.0}, {"p0", 1.0}}));
    r.checks.push_back(make_check("caption_velocity_decreasing_mass", e_vd, "<", tol, {{"q0", 0.0}, {"p0", 1.0}}));
    r.checks.push_back(make_check("caption_position_unit_mass", e_pu, "<", tol, {{"q0", 1.0}, {"p0", 0.0}}));
    r.checks.push_back(make_check("caption_position_decreasing_mass", e_pd, "<", tol, {{"q0", 1.0}, {"p0", 0.0}}));
    r.checks.push_back(make_check("exact_velocity_unit_mass", e_exact, "<", tol, {{"q0", 0.0}, {"p0", 1.0}}));

    if (!out_dir.empty()) {
        io::ensure_directory(out_dir);
        const std::vector<std::string> head{"t", "q_unit_mass", "p_unit_mass", "q_decreasing_mass",
                                            "p_decreasing_mass", "caption_unit_mass", "caption_decreasing_mass"};
        io::CsvWriter a(io::join(out_dir, "fig2_q0_0_p0_1.csv"), head);
        io::CsvWriter b(io::join(out_dir, "fig2_q0_1_p0_0.csv"), head);
        for (std::size_t s = 0; s < vu.size(); ++s) {
            const double t = vu.t[s];
            a.row(std::vector<double>{t, vu.q[s][0], vu.p[s][0], vd.q[s][0], vd.p[s][0], caption_unit(t), caption_decr(t)});
            b.row(std::vector<double>{t, pu.q[s][0], pu.p[s][0], pd.q[s][0], pd.p[s][0], caption_unit(t), caption_decr(t)});
        }
    }
    finish(r, out_dir);
    return r;
}

// -- ReLU phase diagram ------------------------------------------------------

ExperimentResult run_relu_phase_diagram(const json& c, const std::string& out_dir) {
    ExperimentResult r;
    r.experiment = "phase-diagram";
    r.config = c;
    const double L0 = c.at("L0"), k = c.at("overestimation");
    const double h = 1.0 / (k * L0);
    const double horizon = c.at("horizon");
    const long iterations = static_cast<long>(std::ceil(horizon / h));
    const double q0 = c.at("q0"), p0 = c.at("p0"), tol = c.at("class_tol"), band = c.at("band");
    r.config["h"] = h;
    r.config["iterations"] = iterations;

    std::vector<double> masses = linspace(c.at("m_range")[0], c.at("m_range")[1], c.at("m_points"));
    if (c.at("zero_mass_row").get<bool>()) masses.insert(masses.begin(), 0.0);
    const auto alphas = linspace(c.at("alpha_range")[0], c.at("alpha_range")[1], c.at("alpha_points"));

    auto prob = make_relu_problem();
    const double global = (*prob->minimizer())[0];
    struct Cell {
        double m, alpha, q_final;
        std::string cls;
    };
    std::vector<Cell> cells(masses.size() * alphas.size());
    parallel_for(cells.size(), [&](std::size_t idx) {
        const double m = masses[idx / alphas.size()], a = alphas[idx % alphas.size()];
        OptimizerConfig oc;
        oc.method = Method::SemiImplicitSGMP;
        oc.step = StepSchedule::constant(h);
        oc.alpha = a;
        oc.mass = MassSchedule::constant(m);
        oc.batch = prob->count();
        // the first-order state starts at p0 through the initial velocity
        Vector q = Vector::Constant(1, q0), p = Vector::Constant(1, p0);
        for (long n = 0; n < iterations; ++n) std::tie(q, p) = semi_implicit_step(q, p, prob->gradient(q), m, h, a);
        const double qf = q[0];
        std::string cls = "undecided";
        if (std::abs(qf - global) <= tol)
            cls = "global";
        else if (std::abs(qf) <= tol)
            cls = "trapped";
        cells[idx] = {m, a, qf, cls};
    });

    long outside = 0, agree = 0, undecided = 0, zero_global = 0, deep = 0, deep_global = 0;
    for (const auto& cell : cells) {
        const double ind = cell.alpha * cell.alpha - 8.0 * cell.m;
        undecided += cell.cls == "undecided";
        if (cell.m == 0.0) {
            zero_global += cell.cls == "global";
            continue;
        }
        if (std::abs(ind) >= band) {
            ++outside;
            const std::string predicted = ind < 0 ? "global" : "trapped";
            agree += cell.cls == predicted;
        }
        if (ind < -4.0) {
            ++deep;
            deep_global += cell.cls == "global";
        }
    }
    const double agreement = outside ? static_cast<double>(agree) / outside : kNaN;
    r.checks.push_back(make_check("agreement_outside_band", agreement, ">=", c.at("min_agreement"),
                                  {{"points", outside}, {"agree", agree}, {"band", band}}));
    if (c.at("zero_mass_row").get<bool>())
        r.checks.push_back(make_check("zero_mass_never_global", static_cast<double>(zero_global), "==", 0.0));
    r.checks.push_back(make_check("deep_escape_region_global", deep ? static_cast<double>(deep_global) / deep : 1.0,
                                  ">=", 1.0, {{"points", deep}}));
    r.checks.push_back(make_check("undecided_fraction", static_cast<double>(undecided) / cells.size(), "<=",
                                  c.at("max_undecided")));

    if (!out_dir.empty()) {
        io::ensure_directory(out_dir);
        io::CsvWriter w(io::join(out_dir, "phase_diagram.csv"),
                        {"m", "alpha", "h", "class", "escape_indicator", "predicted", "q_final"});
        for (const auto& cell : cells) {
            const double ind = cell.alpha * cell.alpha - 8.0 * cell.m;
            w.row({io::format_number(cell.m), io::format_number(cell.alpha), io::format_number(h), cell.cls,
                   io::format_number(ind), ind < 0 ? "global" : "trapped", io::format_number(cell.q_final)});
        }
    }
    r.summary = {{"h", h}, {"iterations", iterations}, {"undecided", undecided}};
    finish(r, out_dir);
    return r;
}

// -- Benchmarks ----------------------------------------------------------------

namespace {

struct MethodSpec {
    std::string label;
    OptimizerConfig config;
    double mass = kNaN;  // constant mass, NaN otherwise
};

std::vector<MethodSpec> benchmark_methods(const json& c, const StepSchedule& step) {
    std::vector<MethodSpec> ms;
    OptimizerConfig base;
    base.step = step;
    base.alpha = c.at("alpha");
    base.batch = c.at("batch");
    base.paper_scaling = c.at("paper_scaling");
    MethodSpec sgd{"sgd", base};
    sgd.config.method = Method::SGD;
    ms.push_back(sgd);
    for (double m : c.at("masses").get<std::vector<double>>()) {
        MethodSpec s{"sgmp_" + mass_label(m), base, m};
        s.config.method = Method::SemiImplicitSGMP;
        s.config.mass = MassSchedule::constant(m);
        ms.push_back(s);
    }
    if (c.contains("geometric") && !c.at("geometric").is_null()) {
        const double m0 = c.at("geometric").at("m0"), ratio = c.at("geometric").at("ratio");
        MethodSpec s{"sgmp_geometric_" + mass_label(m0), base};
        s.config.method = Method::SemiImplicitSGMP;
        s.config.mass = MassSchedule::geometric(m0, ratio);
        ms.push_back(s);
    }
    return ms;
}

// One series per (method, repetition); non-finite runs are padded with NaN.
std::vector<double> run_series(const OptimizerConfig& oc, const FiniteSumProblem& prob, const Vector& q0,
                               long iterations, Rng rng, bool distance, long& diverged_at) {
    diverged_at = -1;
    try {
        auto rec = run_optimizer(oc, prob, q0, iterations, rng);
        return distance ? rec.distance : rec.objective;
    } catch (const NonFiniteIterate& e) {
        diverged_at = e.iteration;
        return std::vector<double>(static_cast<std::size_t>(iterations + 1), kNaN);
    }
}

void write_curves(const std::string& path, const std::vector<MethodSpec>& methods,
                  const std::vector<std::vector<std::vector<double>>>& series, long iterations) {
    std::vector<std::string> head{"n"};
    for (const auto& m : methods) {
        head.push_back(m.label + "_mean");
        head.push_back(m.label + "_std");
    }
    io::CsvWriter w(path, head);
    for (long n = 0; n <= iterations; ++n) {
        std::vector<double> row{static_cast<double>(n)};
        for (std::size_t j = 0; j < methods.size(); ++j) {
            std::vector<double> col;
            for (const auto& s : series[j]) col.push_back(s[static_cast<std::size_t>(n)]);
            row.push_back(mean(col));
            row.push_back(stddev(col));
        }
        w.row(row);
    }
}

void write_finals(const std::string& path, const std::string& column, const std::vector<MethodSpec>& methods,
                  const std::vector<std::vector<std::vector<double>>>& series) {
    io::CsvWriter w(path, {"rep", "method", column});
    for (std::size_t j = 0; j < methods.size(); ++j)
        for (std::size_t rep = 0; rep < series[j].size(); ++rep)
            w.row({std::to_string(rep), methods[j].label, io::format_number(series[j][rep].back())});
}

std::vector<double> column(const std::vector<std::vector<double>>& reps, std::size_t n) {
    std::vector<double> v;
    for (const auto& s : reps) v.push_back(s[n]);
    return v;
}

} // namespace

ExperimentResult run_quadratic_benchmark(const json& c, const std::string& out_dir) {
    ExperimentResult r;
    r.experiment = "quadratic";
    r.config = c;
    const int K = c.at("K"), N = c.at("N"), reps = c.at("repetitions");
    const long iterations = c.at("iterations");
    if (reps < 1) throw std::invalid_argument("repetitions must be at least 1");
    const double alpha = c.at("alpha");
    const bool scaled = c.at("paper_scaling");
    const std::uint64_t seed = seed_of(c);

    std::vector<std::shared_ptr<const QuadraticProblem>> problems(reps);
    parallel_for(reps, [&](std::size_t rep) {
        problems[rep] = make_quadratic_problem(K, N, c.at("eig_range")[0], c.at("eig_range")[1], c.at("b_stddev"),
                                               seed + 7919 * (rep + 1));
    });
    std::vector<double> Ls, kappas, h0s;
    for (const auto& p : problems) {
        Ls.push_back(p->lipschitz());
        kappas.push_back(p->convexity());
        const double L_eff = scaled ? p->lipschitz() / N : p->lipschitz();
        h0s.push_back(c.at("h0").is_null() ? heuristic_stepsize(alpha, L_eff) : c.at("h0").get<double>());
    }
    r.config["derived"] = {{"L", Ls},
                           {"kappa", kappas},
                           {"lambda", [&] {
                                std::vector<double> l;
                                for (double k : kappas) l.push_back(std::min(k / (alpha * alpha), 0.25));
                                return l;
                            }()},
                           {"h0", h0s}};

    auto methods = benchmark_methods(c, StepSchedule::harmonic(1.0));
    std::vector<std::vector<std::vector<double>>> series(methods.size(), std::vector<std::vector<double>>(reps));
    std::vector<long> diverged(methods.size(), 0);
    std::vector<std::vector<long>> div_at(methods.size(), std::vector<long>(reps, -1));
    parallel_for(methods.size() * reps, [&](std::size_t task) {
        const std::size_t j = task / reps, rep = task % reps;
        OptimizerConfig oc = methods[j].config;
        oc.step = StepSchedule::harmonic(h0s[rep]);
        // common batch stream for every method within a repetition
        series[j][rep] = run_series(oc, *problems[rep], Vector::Zero(K), iterations, seeded(seed, rep + 1), true,
                                    div_at[j][rep]);
    });
    for (std::size_t j = 0; j < methods.size(); ++j)
        for (long d : div_at[j]) diverged[j] += d >= 0;

    const std::size_t last = static_cast<std::size_t>(iterations);
    auto final_mean = [&](std::size_t j) { return mean(column(series[j], last)); };
    std::size_t moderate = 0;
    const double m_mod = c.at("moderate_mass");
    for (std::size_t j = 0; j < methods.size(); ++j)
        if (methods[j].mass == m_mod) moderate = j;
    if (moderate == 0) throw std::invalid_argument("moderate_mass must be one of masses");
    const double sgd_final = final_mean(0), mod_final = final_mean(moderate);
    r.checks.push_back(make_check("moderate_mass_not_worse_than_sgd", mod_final / sgd_final, "<=", 1.0,
                                  {{"sgmp_final_mean", mod_final}, {"sgd_final_mean", sgd_final}, {"mass", m_mod}}));

    // sup over n of |mean_m(n) - mean_sgd(n)|, masses in decreasing order
    std::vector<std::pair<double, double>> gaps;
    for (std::size_t j = 1; j < methods.size(); ++j) {
        if (std::isnan(methods[j].mass)) continue;
        double gap = 0.0;
        for (std::size_t n = 0; n <= last; ++n)
            gap = std::max(gap, std::abs(mean(column(series[j], n)) - mean(column(series[0], n))));
        gaps.emplace_back(methods[j].mass, gap);
    }
    std::sort(gaps.begin(), gaps.end(), [](auto a, auto b) { return a.first > b.first; });
    long gap_violations = 0;
    json gap_json = json::array();
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        gap_json.push_back({{"mass", gaps[k].first}, {"sup_gap", gaps[k].second}});
        if (k > 0 && !(gaps[k].second < gaps[k - 1].second)) ++gap_violations;
    }
    r.checks.push_back(make_check("smaller_mass_closer_to_sgd", static_cast<double>(gap_violations), "==", 0.0,
                                  {{"gaps", gap_json}}));

    long not_decreasing = 0;
    json med = json::object();
    for (std::size_t j = 0; j < methods.size(); ++j) {
        const double first = median(column(series[j], 1)), fin = median(column(series[j], last));
        med[methods[j].label] = {{"n1", first}, {"final", fin}};
        if (!(fin < first)) ++not_decreasing;
    }
    r.checks.push_back(make_check("all_methods_decrease", static_cast<double>(not_decreasing), "==", 0.0,
                                  {{"median_distance", med}}));

    json finals = json::object();
    for (std::size_t j = 0; j < methods.size(); ++j)
        finals[methods[j].label] = {{"mean", final_mean(j)}, {"std", stddev(column(series[j], last))},
                                    {"diverged", diverged[j]}};
    r.summary = {{"final_distance", finals}};
    if (!out_dir.empty()) {
        io::ensure_directory(out_dir);
        write_curves(io::join(out_dir, "quadratic_distance.csv"), methods, series, iterations);
        write_finals(io::join(out_dir, "quadratic_final.csv"), "final_distance", methods, series);
    }
    finish(r, out_dir);
    return r;
}

namespace {

// min over r >= 0 of -a r^2/2 - c r + r^4/(4K), a lower bound for the polynomial objective
double polynomial_lower_bound(const PolynomialProblem& p) {
    const int K = p.dimension();
    Eigen::SelfAdjointEigenSolver<Matrix> es(p.hessian(Vector::Zero(K)));
    const double a = std::max(0.0, -es.eigenvalues().minCoeff());
    const double c = p.gradient(Vector::Zero(K)).norm();
    auto f = [&](double r) { return -0.5 * a * r * r - c * r + r * r * r * r / (4.0 * K); };
    auto df = [&](double r) { return std::make_pair(-a * r - c + r * r * r / K, -a + 3.0 * r * r / K); };
    const double hi = std::max(1.0, std::sqrt(K * (a + c)) + 1.0);
    std::uintmax_t it = 200;
    // f' is increasing past its only positive root, so bisect on the sign
    auto bracket = boost::math::tools::bisect([&](double r) { return df(r).first; }, 0.0, hi,
                                              boost::math::tools::eps_tolerance<double>(50), it);
    const double r = 0.5 * (bracket.first + bracket.second);
    return std::min({f(bracket.first), f(bracket.second), f(r)});
}

} // namespace

ExperimentResult run_nonconvex_benchmark(const json& c, const std::string& out_dir) {
    ExperimentResult r;
    r.experiment = "nonconvex";
    r.config = c;
    const int K = c.at("K"), N = c.at("N"), reps = c.at("repetitions");
    const long iterations = c.at("iterations");
    if (reps < 1) throw std::invalid_argument("repetitions must be at least 1");
    const std::uint64_t seed = seed_of(c);
    const double h = c.at("h");

    std::vector<std::shared_ptr<const PolynomialProblem>> problems(reps);
    parallel_for(reps, [&](std::size_t rep) {
        problems[rep] = make_polynomial_problem(K, N, c.at("eig_range")[0], c.at("eig_range")[1], c.at("b_stddev"),
                                                seed + 7919 * (rep + 1));
    });
    std::vector<double> Ls, bounds;
    for (const auto& p : problems) {
        Ls.push_back(p->lipschitz());
        bounds.push_back(polynomial_lower_bound(*p));
    }
    r.config["derived"] = {{"L_box", Ls}, {"objective_lower_bound", bounds}, {"h", h}};

    auto methods = benchmark_methods(c, StepSchedule::constant(h));
    std::vector<std::vector<std::vector<double>>> series(methods.size(), std::vector<std::vector<double>>(reps));
    std::vector<std::vector<long>> div_at(methods.size(), std::vector<long>(reps, -1));
    parallel_for(methods.size() * reps, [&](std::size_t task) {
        const std::size_t j = task / reps, rep = task % reps;
        series[j][rep] = run_series(methods[j].config, *problems[rep], Vector::Zero(K), iterations,
                                    seeded(seed, rep + 1), false, div_at[j][rep]);
    });

    const std::size_t last = static_cast<std::size_t>(iterations);
    const double sgd_final = median(column(series[0], last));
    double worst = -std::numeric_limits<double>::infinity();
    json finals = json::object();
    for (std::size_t j = 0; j < methods.size(); ++j) {
        const double med = median(column(series[j], last));
        long div = std::count_if(div_at[j].begin(), div_at[j].end(), [](long d) { return d >= 0; });
        finals[methods[j].label] = {{"median", med}, {"mean", mean(column(series[j], last))}, {"diverged", div}};
        if (j > 0) worst = std::max(worst, med - sgd_final);
    }
    r.checks.push_back(make_check("momentum_final_objective_not_above_sgd", worst, "<=", 0.0,
                                  {{"final_objective", finals}}));

    const std::size_t early = static_cast<std::size_t>(std::ceil(c.at("early_fraction").get<double>() * iterations));
    std::vector<std::pair<double, double>> early_meds;
    for (std::size_t j = 1; j < methods.size(); ++j)
        if (!std::isnan(methods[j].mass)) early_meds.emplace_back(methods[j].mass, median(column(series[j], early)));
    std::sort(early_meds.begin(), early_meds.end(), [](auto a, auto b) { return a.first > b.first; });
    long early_violations = 0;
    json early_json = json::array();
    for (std::size_t k = 0; k < early_meds.size(); ++k) {
        early_json.push_back({{"mass", early_meds[k].first}, {"median_objective", early_meds[k].second}});
        if (k > 0 && !(early_meds[k].second <= early_meds[k - 1].second)) ++early_violations;
    }
    r.checks.push_back(make_check("smaller_mass_faster_initial_decay", static_cast<double>(early_violations), "==",
                                  0.0, {{"iteration", early}, {"medians", early_json}}));

    double margin = std::numeric_limits<double>::infinity();
    long non_finite = 0;
    for (std::size_t j = 0; j < methods.size(); ++j)
        for (int rep = 0; rep < reps; ++rep)
            for (double v : series[j][rep]) {
                if (!std::isfinite(v)) {
                    ++non_finite;
                    continue;
                }
                margin = std::min(margin, v - bounds[rep]);
            }
    r.checks.push_back(make_check("objective_bounded_below", margin, ">=", 0.0, {{"non_finite_values", non_finite}}));

    r.summary = {{"final_objective", finals}};
    if (!out_dir.empty()) {
        io::ensure_directory(out_dir);
        write_curves(io::join(out_dir, "nonconvex_objective.csv"), methods, series, iterations);
        write_finals(io::join(out_dir, "nonconvex_final.csv"), "final_objective", methods, series);
    }
    finish(r, out_dir);
    return r;
}

// -- Coupling study ------------------------------------------------------------

namespace {

std::shared_ptr<const QuadraticProblem> problem_from(const json& p, std::uint64_t seed) {
    return make_quadratic_problem(p.at("K"), p.at("N"), p.at("eig_range")[0], p.at("eig_range")[1],
                                  p.at("b_stddev"), seed);
}

double assumption2_lambda(const FiniteSumProblem& p, double alpha) {
    return std::min(p.convexity() / (alpha * alpha), 0.25);
}

void fixed_sample_part(const json& c, std::uint64_t seed, ExperimentResult& r, const std::string& out_dir) {
    auto prob = problem_from(c.at("problem"), seed + 11);
    const int i = c.at("component");
    const double T = c.at("horizon");
    auto theta_i = prob->component_minimizer(i);
    if (!theta_i) throw std::invalid_argument("fixed-sample component must be strongly convex");
    Rng rng = seeded(seed, 101);
    const int K = prob->dimension();
    const Vector q0 = gaussian_vector(K, 1.0, rng), p0 = gaussian_vector(K, c.at("p0_stddev"), rng);
    const double L = prob->lipschitz();
    const auto masses = c.at("masses").get<std::vector<double>>();

    std::vector<CoupledResult> res(masses.size());
    parallel_for(masses.size(), [&](std::size_t k) {
        PhaseState flow{q0, Vector::Zero(K), 0.0, -1}, mom{q0, p0, 0.0, -1};
        res[k] = integrate_coupled({SystemSpec::gradient_flow(i), SystemSpec::fixed_sample_momentum(i, masses[k])},
                                   *prob, JumpSkeleton{}, {flow, mom}, T);
    });
    bool bound_ok = true;
    json per = json::array();
    std::vector<double> sups;
    for (std::size_t k = 0; k < masses.size(); ++k) {
        auto b = fixed_sample_coupling_bound(res[k].times, res[k].distance[0], L, masses[k], q0, p0, q0, *theta_i);
        bound_ok = bound_ok && b.pass;
        sups.push_back(res[k].sup_distance[0]);
        per.push_back({{"mass", masses[k]},
                       {"sup_distance", res[k].sup_distance[0]},
                       {"bound_at_T", coupling_constant(L) * masses[k] * (1 + T) * (p0.norm() + (q0 - *theta_i).norm())},
                       {"bound_check", b.to_json()}});
    }
    r.checks.push_back(make_check("fixed_sample_bound", bound_ok ? 1.0 : 0.0, "==", 1.0,
                                  {{"C0", coupling_constant(L)}, {"L", L}, {"per_mass", per}}));
    std::vector<double> ratios;
    for (std::size_t k = 1; k < sups.size(); ++k) ratios.push_back(sups[k - 1] / sups[k]);
    const double rmin = ratios.empty() ? kNaN : *std::min_element(ratios.begin(), ratios.end());
    const double rmax = ratios.empty() ? kNaN : *std::max_element(ratios.begin(), ratios.end());
    r.checks.push_back(make_check("fixed_sample_ratio_min", rmin, ">=", c.at("ratio_range")[0], {{"ratios", ratios}}));
    r.checks.push_back(make_check("fixed_sample_ratio_max", rmax, "<=", c.at("ratio_range")[1], {{"ratios", ratios}}));
    r.summary["fixed_sample"] = {{"sup_distance", sups}, {"ratios", ratios}, {"L", L}};
    r.config["derived"]["fixed_sample"] = {{"L", L}, {"C0", coupling_constant(L)}, {"kappa", prob->convexity()}};

    if (!out_dir.empty()) {
        std::vector<std::string> head{"t"};
        for (double m : masses) {
            head.push_back("distance_" + mass_label(m));
            head.push_back("bound_" + mass_label(m));
        }
        io::CsvWriter w(io::join(out_dir, "coupling_fixed_sample.csv"), head);
        const double bracket = p0.norm() + (q0 - *theta_i).norm();
        for (std::size_t s = 0; s < res[0].times.size(); ++s) {
            const double t = res[0].times[s];
            std::vector<double> row{t};
            for (std::size_t k = 0; k < masses.size(); ++k) {
                row.push_back(res[k].distance[0][s]);
                row.push_back(coupling_constant(L) * masses[k] * (1 + t) * bracket);
            }
            w.row(row);
        }
    }
}

void hsgmp_part(const json& c, const FiniteSumProblem& prob, const Vector& q0, double gamma, std::uint64_t seed,
                ExperimentResult& r, const std::string& out_dir) {
    const auto masses = c.at("masses").get<std::vector<double>>();
    const double delta = c.at("delta"), T = c.at("horizon");
    const int skeletons = c.at("skeletons");
    const int K = prob.dimension();
    IntegratorOptions o;
    o.samples = c.at("samples");
    const auto grid = uniform_grid(0.0, T, o.samples + 1);

    std::vector<std::vector<double>> sup(masses.size(), std::vector<double>(skeletons));
    std::vector<std::vector<std::vector<double>>> path(masses.size(),
                                                       std::vector<std::vector<double>>(skeletons));
    bool self_zero = true;
    parallel_for(skeletons, [&](std::size_t s) {
        Rng rng = run_stream(seed, s);
        double raw_T = 0.0;
        for (double m : masses) raw_T = std::max(raw_T, raw_horizon_needed(SystemSpec::sgp_rate(std::pow(m, delta)), T));
        auto raw = simulate_skeleton({prob.count(), gamma}, raw_T, rng);
        const PhaseState init{q0, Vector::Zero(K), 0.0, -1};
        for (std::size_t k = 0; k < masses.size(); ++k) {
            const double nu = std::pow(masses[k], delta);
            auto res = integrate_coupled({SystemSpec::sgp_rate(nu), SystemSpec::hsgmp_mass(masses[k], delta)}, prob,
                                         raw, {init, init}, T, o);
            sup[k][s] = res.sup_distance[0];
            for (double t : grid) path[k][s].push_back(value_at(res.times, res.distance[0], t));
        }
        if (s == 0) {
            auto same = integrate_coupled({SystemSpec::sgp(), SystemSpec::sgp()}, prob, raw, {init, init}, T, o);
            self_zero = same.sup_distance[0] == 0.0;
        }
    });
    r.checks.push_back(make_check("sgp_self_coupling_zero", self_zero ? 0.0 : 1.0, "==", 0.0));

    long violations = 0;
    json per = json::array();
    std::vector<double> means;
    for (std::size_t k = 0; k < masses.size(); ++k) {
        means.push_back(mean(sup[k]));
        per.push_back({{"mass", masses[k]}, {"mean_sup_distance", means.back()}, {"std", stddev(sup[k])}});
        if (k > 0 && !(masses[k] < masses[k - 1] ? means[k] < means[k - 1] : means[k] > means[k - 1])) ++violations;
    }
    r.checks.push_back(make_check("hsgmp_mean_sup_monotone", static_cast<double>(violations), "==", 0.0,
                                  {{"per_mass", per}, {"skeletons", skeletons}}));
    r.summary["hsgmp"] = per;

    if (!out_dir.empty()) {
        io::CsvWriter w(io::join(out_dir, "coupling_hsgmp.csv"),
                        {"mass", "nu", "mean_sup_distance", "std_sup_distance", "median_sup_distance"});
        for (std::size_t k = 0; k < masses.size(); ++k)
            w.row(std::vector<double>{masses[k], std::pow(masses[k], delta), means[k], stddev(sup[k]), median(sup[k])});
        std::vector<std::string> head{"t"};
        for (double m : masses) head.push_back("mean_distance_" + mass_label(m));
        io::CsvWriter wt(io::join(out_dir, "coupling_hsgmp_time.csv"), head);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::vector<double> row{grid[g]};
            for (std::size_t k = 0; k < masses.size(); ++k) row.push_back(mean(column(path[k], g)));
            wt.row(row);
        }
    }
}

void quantile_table(const std::string& path, const std::vector<double>& grid,
                    const std::vector<std::vector<double>>& values, const MassSchedule& mass) {
    io::CsvWriter w(path, {"t", "median", "q25", "q75", "mass"});
    for (std::size_t g = 0; g < grid.size(); ++g) {
        auto col = column(values, g);
        w.row(std::vector<double>{grid[g], median(col), quantile(col, 0.25), quantile(col, 0.75), mass.mass(grid[g])});
    }
}

void dmsgmp_part(const json& c, const FiniteSumProblem& prob, const Vector& q0, double gamma, std::uint64_t seed,
                 ExperimentResult& r, const std::string& out_dir) {
    const double T = c.at("horizon"), lambda = c.at("lambda");
    const int skeletons = c.at("skeletons");
    const int K = prob.dimension();
    auto mass = MassSchedule::exponential(c.at("m0"), lambda);
    const auto a3 = validate_assumption3(mass, assumption2_lambda(prob, 1.0), uniform_grid(0.0, T, 1001));
    IntegratorOptions o;
    o.samples = c.at("samples");
    const auto times = c.at("compare_times").get<std::vector<double>>();
    o.extra_times = times;
    auto grid = uniform_grid(0.0, T, o.samples + 1);

    std::vector<std::vector<double>> dist(skeletons);
    std::vector<std::vector<double>> at(skeletons);
    parallel_for(skeletons, [&](std::size_t s) {
        Rng rng = run_stream(seed + 1000003, s);
        auto raw = simulate_skeleton({prob.count(), gamma}, T, rng);
        const PhaseState init{q0, Vector::Zero(K), 0.0, -1};
        auto res = integrate_coupled({SystemSpec::sgp(), SystemSpec::dmsgmp(mass)}, prob, raw, {init, init}, T, o);
        for (double t : grid) dist[s].push_back(value_at(res.times, res.distance[0], t));
        for (double t : times) at[s].push_back(value_at(res.times, res.distance[0], t));
    });
    const double early = median(column(at, 0)), late = median(column(at, 1));
    r.checks.push_back(make_check("dmsgmp_median_distance_decreases", late / early, "<", 1.0,
                                  {{"times", times}, {"median_early", early}, {"median_late", late},
                                   {"mass_decay_condition", a3.to_json()}}));
    r.summary["dmsgmp"] = {{"median_early", early}, {"median_late", late}};
    if (!out_dir.empty()) quantile_table(io::join(out_dir, "coupling_dmsgmp.csv"), grid, dist, mass);
}

void ddsgmp_part(const json& c, const FiniteSumProblem& prob, const Vector& q0, double gamma, std::uint64_t seed,
                 ExperimentResult& r, const std::string& out_dir) {
    const double T = c.at("horizon"), lambda = c.at("lambda"), m0 = c.at("m0");
    const int skeletons = c.at("skeletons");
    const int K = prob.dimension();
    auto mass = MassSchedule::exponential(m0, lambda);
    const auto tc = TimeChange::quadratic();
    auto sys = SystemSpec::ddsgmp(mass, tc);
    IntegratorOptions o;
    o.samples = c.at("samples");
    o.record_jumps = false;
    const auto times = c.at("compare_times").get<std::vector<double>>();
    o.extra_times = times;
    auto grid = uniform_grid(0.0, T, o.samples + 1);
    const Vector theta = *prob.minimizer();
    const IndexProcessParams ip{prob.count(), gamma};
    const auto alphas = quadratic_clock_alphas(prob.convexity(), m0, lambda, ip);

    std::vector<std::vector<double>> dist(skeletons), at(skeletons);
    std::vector<double> a4_fraction(skeletons);
    parallel_for(skeletons, [&](std::size_t s) {
        Rng rng = run_stream(seed + 2000003, s);
        auto raw = simulate_skeleton(ip, raw_horizon_needed(sys, T), rng);
        auto rec = integrate(sys, prob, raw, {q0, Vector::Zero(K), 0.0, -1}, T, o);
        std::vector<double> d;
        for (std::size_t k = 0; k < rec.size(); ++k) d.push_back((rec.q[k] - theta).norm());
        for (double t : grid) dist[s].push_back(value_at(rec.t, d, t));
        for (double t : times) at[s].push_back(value_at(rec.t, d, t));
        auto ok = assumption4_monitor(raw, mass, tc, prob.convexity(), alphas);
        a4_fraction[s] = ok.empty() ? kNaN : static_cast<double>(std::count(ok.begin(), ok.end(), true)) / ok.size();
    });
    const double early = median(column(at, 0)), late = median(column(at, 1));
    r.checks.push_back(make_check("ddsgmp_median_distance_to_minimiser_decreases", late / early, "<", 1.0,
                                  {{"times", times}, {"median_early", early}, {"median_late", late}}));
    r.summary["ddsgmp"] = {{"median_early", early},
                           {"median_late", late},
                           {"event_condition_fraction_mean", mean(a4_fraction)},
                           {"quadratic_clock_alphas", {alphas.a1, alphas.a2, alphas.a3}}};
    if (!out_dir.empty()) quantile_table(io::join(out_dir, "coupling_ddsgmp.csv"), grid, dist, mass);
}

} // namespace

ExperimentResult run_coupling_study(const json& c, const std::string& out_dir) {
    ExperimentResult r;
    r.experiment = "coupling";
    r.config = c;
    r.config["derived"] = json::object();
    const std::uint64_t seed = seed_of(c);
    const double gamma = c.at("gamma");
    if (!out_dir.empty()) io::ensure_directory(out_dir);

    auto prob = problem_from(c.at("problem"), seed);
    Rng rng = seeded(seed, 7);
    const Vector q0 = gaussian_vector(prob->dimension(), c.at("q0_stddev"), rng);
    r.config["derived"]["problem"] = {{"L", prob->lipschitz()},
                                      {"kappa", prob->convexity()},
                                      {"lambda", assumption2_lambda(*prob, 1.0)},
                                      {"q0", std::vector<double>(q0.data(), q0.data() + q0.size())}};

    auto enabled = [&](const char* key) { return c.contains(key) && c.at(key).value("enabled", true); };
    if (enabled("fixed_sample")) fixed_sample_part(c.at("fixed_sample"), seed, r, out_dir);
    if (enabled("hsgmp")) hsgmp_part(c.at("hsgmp"), *prob, q0, gamma, seed, r, out_dir);
    if (enabled("dmsgmp")) dmsgmp_part(c.at("dmsgmp"), *prob, q0, gamma, seed, r, out_dir);
    if (enabled("ddsgmp")) ddsgmp_part(c.at("ddsgmp"), *prob, q0, gamma, seed, r, out_dir);
    finish(r, out_dir);
    return r;
}

} // namespace sgmp
