// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "sgmp/experiments.hpp"
#include "sgmp/index_process.hpp"
#include "sgmp/lyapunov.hpp"
#include "sgmp/optimizers.hpp"
#include "sgmp/problems.hpp"
#include "sgmp/simulator.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace sgmp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget;  // seconds
    std::function<Outcome()> run;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

std::string check_line(const ExperimentResult& r, const std::string& name) {
    const auto& c = r.check(name);
    return name + "=" + fmt(c.value) + (c.pass ? "" : "(fail)");
}

Vector normal_vector(int K, double s, Rng& rng) {
    std::normal_distribution<double> n(0.0, s);
    Vector v(K);
    for (int k = 0; k < K; ++k) v[k] = n(rng);
    return v;
}

json coupling_only(const std::string& part) {
    json o = json::object();
    for (const char* p : {"fixed_sample", "hsgmp", "dmsgmp", "ddsgmp"}) o[p] = {{"enabled", part == p}};
    return o;
}

Outcome fig2_oracle() {
    auto r = run_fig2(default_config("fig2"));
    Outcome o;
    o.pass = r.check("caption_velocity_unit_mass").pass && r.check("caption_velocity_decreasing_mass").pass;
    o.detail = "max|p - f| unit mass " + fmt(r.check("caption_velocity_unit_mass").value) + ", decreasing mass " +
               fmt(r.check("caption_velocity_decreasing_mass").value) + "; the same formulas as q from (q0,p0)=(1,0): " +
               fmt(r.check("caption_position_unit_mass").value) + ", " +
               fmt(r.check("caption_position_decreasing_mass").value);
    return o;
}

Outcome escape_condition() {
    auto r = run_relu_phase_diagram(default_config("phase-diagram"));
    Outcome o;
    o.pass = r.check("agreement_outside_band").pass && r.check("zero_mass_never_global").pass;
    o.detail = check_line(r, "agreement_outside_band") + " " + check_line(r, "zero_mass_never_global") + " " +
               check_line(r, "undecided_fraction");
    return o;
}

Outcome lyapunov_decay() {
    auto p = make_quadratic_problem(10, 5, 0.05, 1.0, 1.0, 2024);
    const double alpha = 1.0;
    const double lambda = std::min(p->convexity() / (alpha * alpha), 0.25);
    LyapunovParams par{alpha, lambda, *p->minimizer()};
    Rng rng(3);
    double worst_ratio = 0.0, worst_energy = -1e300;
    bool ok = true;
    for (int s = 0; s < 20; ++s) {
        PhaseState init{par.theta_star + normal_vector(10, 2.0, rng), normal_vector(10, 2.0, rng), 0.0, -1};
        auto rec = integrate(SystemSpec::underdamped(MassSchedule::constant(1.0), alpha), *p, init, 20.0);
        auto rep = decay_certificate(rec, par, *p);
        ok = ok && rep.extra["ratio_pass"].get<bool>() && rep.extra["energy_bound_pass"].get<bool>();
        worst_ratio = std::max(worst_ratio, rep.extra["max_ratio"].get<double>());
        worst_energy = std::max(worst_energy, rep.extra["energy_bound_max_violation"].get<double>());
    }
    return {ok, "kappa=" + fmt(p->convexity()) + " lambda=" + fmt(lambda) + " max ratio " + fmt(worst_ratio) +
                    ", max bound excess " + fmt(worst_energy)};
}

Outcome fixed_sample_coupling() {
    auto r = run_coupling_study(resolve_config("coupling", "desk", coupling_only("fixed_sample")));
    Outcome o;
    o.pass = r.check("fixed_sample_bound").pass && r.check("fixed_sample_ratio_min").pass &&
             r.check("fixed_sample_ratio_max").pass;
    std::ostringstream s;
    s << "sup distances " << r.summary["fixed_sample"]["sup_distance"].dump() << " ratios "
      << r.summary["fixed_sample"]["ratios"].dump() << " bound " << (r.check("fixed_sample_bound").pass ? "holds" : "violated");
    o.detail = s.str();
    return o;
}

Outcome stochastic_coupling() {
    auto r = run_coupling_study(resolve_config("coupling", "desk", coupling_only("hsgmp")));
    Outcome o;
    o.pass = r.check("hsgmp_mean_sup_monotone").pass && r.check("sgp_self_coupling_zero").pass;
    std::ostringstream s;
    s << "mean sup distance";
    for (const auto& e : r.summary["hsgmp"]) s << " m=" << e["mass"] << ":" << fmt(e["mean_sup_distance"]);
    o.detail = s.str();
    return o;
}

Outcome longtime_coupling() {
    json over = coupling_only("dmsgmp");
    over["ddsgmp"]["enabled"] = true;
    auto r = run_coupling_study(resolve_config("coupling", "desk", over));
    Outcome o;
    o.pass = r.check("dmsgmp_median_distance_decreases").pass &&
             r.check("ddsgmp_median_distance_to_minimiser_decreases").pass;
    const auto& d = r.summary["dmsgmp"];
    const auto& dd = r.summary["ddsgmp"];
    o.detail = "dmSGMP median |q-theta| t=5 " + fmt(d["median_early"]) + " t=20 " + fmt(d["median_late"]) +
               "; ddSGMP median |q-theta*| t=10 " + fmt(dd["median_early"]) + " t=40 " + fmt(dd["median_late"]);
    return o;
}

Outcome scheme_algebra() {
    bool bitwise = true;
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int s = 0; s < 1000; ++s) {
        Vector q = normal_vector(6, 3.0, rng), p = normal_vector(6, 3.0, rng), g = normal_vector(6, 3.0, rng);
        const double h = 1e-3 + std::abs(n(rng));
        auto [q1, p1] = semi_implicit_step(q, p, g, 0.0, h, 1.0);
        Vector gd = q - h * g;
        for (int k = 0; k < 6; ++k) bitwise = bitwise && q1[k] == gd[k];
    }

    auto prob = make_quadratic_problem(5, 4, 0.5, 2.0, 1.0, 6);
    const double h = 0.02, m = 0.5, alpha = 1.5;
    const double w = m / (m + alpha * h), pre = h * h / (m + alpha * h);
    Vector q = Vector::LinSpaced(5, -1.0, 3.0), p = Vector::Zero(5);
    std::vector<Vector> grads;
    double expansion_err = 0.0;
    for (int k = 0; k < 50; ++k) {
        grads.push_back(prob->gradient(q));
        Vector sum = Vector::Zero(5);
        for (int j = 0; j <= k; ++j) sum += std::pow(w, j) * grads[k - j];
        const Vector predicted = q - pre * sum;
        std::tie(q, p) = semi_implicit_step(q, p, grads.back(), m, h, alpha);
        expansion_err = std::max(expansion_err, (predicted - q).norm());
    }

    double rescale_err = 0.0;
    for (double rho : {0.1, 10.0}) {
        ScaledProblem scaled(prob, rho);
        Vector a = Vector::LinSpaced(5, -2.0, 1.0), pa = Vector::Zero(5), b = a, pb = pa;
        for (int k = 0; k < 50; ++k) {
            std::tie(a, pa) = semi_implicit_step(a, pa, prob->gradient(a), m, h, alpha);
            std::tie(b, pb) = semi_implicit_step(b, pb, scaled.gradient(b), m / rho, h / rho, alpha);
            rescale_err = std::max({rescale_err, (a - b).lpNorm<Eigen::Infinity>(),
                                    (rho * pa - pb).lpNorm<Eigen::Infinity>() / std::max(1.0, rho)});
        }
    }
    return {bitwise && expansion_err <= 1e-10 && rescale_err <= 1e-12,
            std::string("zero-mass step ") + (bitwise ? "bitwise equal to GD" : "differs from GD") +
                ", expansion error " + fmt(expansion_err) + ", rescaling error " + fmt(rescale_err)};
}

Outcome mass_stability() {
    auto p = make_quadratic_problem(10, 5, 0.5, 2.0, 1.0, 7);
    const double alpha = 1.0, h = heuristic_stepsize(alpha, p->lipschitz());
    const Vector q0 = Vector::Constant(10, 3.0);
    const double d0 = (q0 - *p->minimizer()).norm();
    bool ok = true;
    std::ostringstream s;
    s << "final/initial distance:";
    for (double m : {10.0, 1.0, 1e-3, 1e-9, 0.0}) {
        OptimizerConfig cfg;
        cfg.step = StepSchedule::constant(h);
        cfg.mass = MassSchedule::constant(m);
        cfg.alpha = alpha;
        cfg.batch = p->count();
        Rng rng(0);
        auto rec = run_optimizer(cfg, *p, q0, 50000, rng);
        const double peak = *std::max_element(rec.distance.begin(), rec.distance.end());
        ok = ok && peak < 10.0 * d0 && rec.distance.back() < 1e-8 * d0;
        s << " m=" << m << ":" << fmt(rec.distance.back() / d0);
    }
    s << "; explicit analogue:";
    for (double m : {1e-3, 1e-9}) {
        OptimizerConfig cm;
        cm.method = Method::ClassicalMomentum;
        cm.rho = 1.0 - alpha * h / m;
        cm.eta = h * h / m;
        cm.batch = p->count();
        Rng rng(0);
        bool diverged = false;
        try {
            auto rec = run_optimizer(cm, *p, q0, 2000, rng);
            diverged = rec.distance.back() > 1e6 * d0;
        } catch (const NonFiniteIterate&) {
            diverged = true;
        }
        ok = ok && diverged;
        s << " m=" << m << (diverged ? " diverges" : " stays bounded");
    }
    return {ok, s.str()};
}

Outcome benchmarks() {
    auto q = run_quadratic_benchmark(default_config("quadratic"));
    auto nc = run_nonconvex_benchmark(default_config("nonconvex"));
    Outcome o;
    o.pass = q.check("moderate_mass_not_worse_than_sgd").pass &&
             nc.check("momentum_final_objective_not_above_sgd").pass &&
             nc.check("smaller_mass_faster_initial_decay").pass;
    const auto& qd = q.check("moderate_mass_not_worse_than_sgd").detail;
    o.detail = "quadratic final mean distance m=0.1 " + fmt(qd["sgmp_final_mean"]) + " vs SGD " +
               fmt(qd["sgd_final_mean"]) + "; nonconvex worst (momentum - SGD) median objective " +
               fmt(nc.check("momentum_final_objective_not_above_sgd").value) + "; " +
               check_line(nc, "smaller_mass_faster_initial_decay");
    return o;
}

Outcome index_law() {
    const IndexProcessParams pr{5, 1.0};
    const std::vector<double> times{0.1, 0.5, 2.0};
    const int runs = 100000;
    std::vector<std::vector<std::vector<double>>> counts(times.size(),
                                                         std::vector<std::vector<double>>(5, std::vector<double>(5)));
    std::vector<double> rows(5, 0.0), marginal(5, 0.0);
    Rng rng(10);
    for (int r = 0; r < runs; ++r) {
        auto sk = simulate_skeleton(pr, times.back(), rng);
        const int k = sk.indices.front();
        rows[k] += 1;
        for (std::size_t a = 0; a < times.size(); ++a) counts[a][k][sk.index_at(times[a])] += 1;
        marginal[sk.indices.back()] += 1;
    }
    double worst_z = 0.0;
    for (std::size_t a = 0; a < times.size(); ++a)
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 5; ++j) {
                const double P = 0.2 + ((k == j) - 0.2) * std::exp(-pr.gamma * pr.N * times[a]);
                const double se = std::sqrt(P * (1 - P) / rows[k]);
                worst_z = std::max(worst_z, std::abs(counts[a][k][j] / rows[k] - P) / se);
            }
    double chi2 = 0.0;
    for (double c : marginal) chi2 += (c - runs / 5.0) * (c - runs / 5.0) / (runs / 5.0);
    const double pvalue = boost::math::cdf(boost::math::complement(boost::math::chi_squared(4), chi2));
    return {worst_z <= 3.0 && pvalue > 0.01,
            "largest |freq - P|/SE " + fmt(worst_z) + " over 75 entries, chi2 p-value " + fmt(pvalue)};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "closed-form flow oracle", 1, fig2_oracle},
        {2, "escape condition phase diagram", 60, escape_condition},
        {3, "Lyapunov decay", 10, lyapunov_decay},
        {4, "fixed-sample coupling", 10, fixed_sample_coupling},
        {5, "stochastic coupling mass ladder", 60, stochastic_coupling},
        {6, "longtime coupling", 120, longtime_coupling},
        {7, "scheme algebra", 1, scheme_algebra},
        {8, "stability in mass", 10, mass_stability},
        {9, "benchmarks", 300, benchmarks},
        {10, "index-process law", 30, index_law},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("criterion %2d %s  %-32s %7.2fs (limit %gs%s)  %s\n", c.id, pass ? "PASS" : "FAIL",
                    c.name.c_str(), secs, c.budget, in_time ? "" : ", exceeded", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
