#include "sgmp/lyapunov.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace sgmp;

namespace {

std::shared_ptr<const QuadraticProblem> half_square() {
    return make_single_quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
}

Vector v1(double x) { return Vector::Constant(1, x); }

Vector random_vector(int K, Rng& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Vector v(K);
    for (int k = 0; k < K; ++k) v[k] = n(rng);
    return v;
}

} // namespace

TEST(Lyapunov, HandComputedValues) {
    auto p = half_square();
    LyapunovParams par{1.0, 0.0, Vector::Zero(1)};
    // 1/2 + 1/4 ((1 + 1)^2 + 1)
    EXPECT_DOUBLE_EQ(eval_V(par, *p, v1(1.0), v1(1.0)), 1.75);
    EXPECT_DOUBLE_EQ(eval_V(par, *p, v1(1.0), v1(0.0)), 0.75);
    par.alpha = 2.0;
    par.lambda = 0.25;
    // 1/2 + 1 * ((1 + 1/2)^2 + 1/4 - 1/4)
    EXPECT_DOUBLE_EQ(eval_V(par, *p, v1(1.0), v1(1.0)), 2.75);
    EXPECT_DOUBLE_EQ(eval_V(par, *p, v1(0.0), v1(0.0)), 0.0);
    auto p2 = make_single_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    LyapunovParams par2{2.0, 0.25, Vector::Zero(2)};
    // 1/2 + 1 * (1 - 1/4)
    EXPECT_DOUBLE_EQ(eval_V(par2, *p2, Vector::Unit(2, 0), Vector::Zero(2)), 1.25);
    // 0.5/0.5 + ((1.5)^2 + 0.25 - 0.1) / 1
    EXPECT_DOUBLE_EQ(eval_V_scaled(*p, 0, 0.5, 0.2, Vector::Zero(1), v1(1.0), v1(1.0)), 3.4);
    // 0.5 * 0.5 + ((1 + 1)^2 + 1) / 4
    EXPECT_DOUBLE_EQ(
        eval_V_time_dependent(MassSchedule::constant(0.5), *p, 0, Vector::Zero(1), 3.0, v1(1.0), v1(2.0)), 1.5);
}

TEST(Lyapunov, ConstantBoundsEnergy) {
    EXPECT_DOUBLE_EQ(energy_bound_constant(2.0, 0.25), 4.0 + 8.0 / (4.0 * 0.5));
    auto p = make_quadratic_problem(3, 4, 0.5, 2.0, 1.0, 3);
    Rng rng(8);
    for (double alpha : {0.5, 1.0, 2.0}) {
        for (double lambda : {0.0, 0.1, 0.25, 0.45}) {
            LyapunovParams par{alpha, lambda, *p->minimizer()};
            const double C = energy_bound_constant(alpha, lambda);
            for (int s = 0; s < 2000; ++s) {
                Vector x = random_vector(3, rng, 3.0), y = random_vector(3, rng, 3.0);
                const double V = eval_V(par, *p, x, y);
                EXPECT_GE(V, 0.0);
                EXPECT_GE(V, 0.25 * alpha * alpha * (0.5 - lambda) * (x - par.theta_star).squaredNorm() * (1 - 1e-12));
                EXPECT_LE(y.squaredNorm() + (x - par.theta_star).squaredNorm(), C * V * (1 + 1e-12));
            }
        }
    }
}

TEST(ContractionInequality, QuadraticThresholds) {
    const double alpha = 1.0, r = 0.2;
    Matrix H = Matrix::Zero(2, 2);
    H.diagonal() << r * alpha * alpha, 1.0;
    Vector c(2);
    c << 0.3, -0.7;
    auto p = make_single_quadratic(H, c);
    Vector theta = *p->minimizer();
    auto grid = assumption_grid(2, 10.0, 10000, &theta);
    ASSERT_EQ(grid.size(), 10000u);
    const double lambda = std::min(r, 0.25);
    EXPECT_TRUE(check_assumption2(*p, alpha, lambda, grid).pass);
    // exact threshold along the softest direction is 2r / (2r + 1)
    EXPECT_TRUE(check_assumption2(*p, alpha, 2 * r / (2 * r + 1) * (1 - 1e-9), grid).pass);
    auto f15 = check_assumption2(*p, alpha, 1.5 * lambda, grid);
    EXPECT_FALSE(f15.pass);
    EXPECT_GT(f15.max_violation, 0.0);
    EXPECT_FALSE(check_assumption2(*p, alpha, 2.0 * lambda, grid).pass);
    EXPECT_TRUE(check_assumption2_component(*p, 0, alpha, lambda, grid).pass);
}

TEST(ContractionInequality, HigherDimensionUsesSobol) {
    auto p = make_quadratic_problem(4, 3, 0.5, 2.0, 1.0, 14);
    const double alpha = 2.0, kappa = p->convexity();
    auto grid = assumption_grid(4, 10.0, 5000, &*p->minimizer());
    ASSERT_EQ(grid.size(), 5000u);
    for (const auto& x : grid) EXPECT_LE((x - *p->minimizer()).lpNorm<Eigen::Infinity>(), 10.0);
    EXPECT_TRUE(check_assumption2(*p, alpha, std::min(kappa / (alpha * alpha), 0.25), grid).pass);
    EXPECT_FALSE(check_assumption2(*p, alpha, 1.0, grid).pass);
}

TEST(Decay, CertificatePassesAlongUnderdampedFlow) {
    auto p = make_quadratic_problem(3, 3, 0.5, 2.0, 1.0, 15);
    const double alpha = 2.0;
    LyapunovParams par{alpha, std::min(p->convexity() / (alpha * alpha), 0.25), *p->minimizer()};
    Rng rng(1);
    for (int s = 0; s < 5; ++s) {
        PhaseState init{random_vector(3, rng, 2.0), random_vector(3, rng, 2.0), 0.0, -1};
        auto rec = integrate(SystemSpec::underdamped(MassSchedule::constant(1.0), alpha), *p, init, 20.0);
        auto rep = decay_certificate(rec, par, *p);
        EXPECT_TRUE(rep.pass) << rep.to_json().dump();
        EXPECT_TRUE(rep.extra["energy_bound_pass"].get<bool>());
    }
}

TEST(Decay, ZeroTrajectoryAndCorruptedControl) {
    auto p = make_quadratic_problem(2, 3, 0.5, 2.0, 1.0, 16);
    const double alpha = 2.0;
    LyapunovParams par{alpha, std::min(p->convexity() / 4.0, 0.25), *p->minimizer()};
    PhaseState rest{par.theta_star, Vector::Zero(2), 0.0, -1};
    auto flat = integrate(SystemSpec::underdamped(MassSchedule::constant(1.0), alpha), *p, rest, 5.0);
    EXPECT_TRUE(decay_certificate(flat, par, *p).pass);

    PhaseState init{par.theta_star + Vector::Ones(2), Vector::Zero(2), 0.0, -1};
    auto rec = integrate(SystemSpec::underdamped(MassSchedule::constant(1.0), alpha), *p, init, 10.0);
    ASSERT_TRUE(decay_certificate(rec, par, *p).pass);
    for (std::size_t s = rec.size() / 2; s < rec.size(); ++s) rec.p[s] *= 10.0;
    auto bad = decay_certificate(rec, par, *p);
    EXPECT_FALSE(bad.pass);
    EXPECT_FALSE(bad.extra["monotone_pass"].get<bool>());
}

TEST(Decay, TimeDependentFunctionDecaysWithDecreasingMass) {
    // Phi_i with Hessian >= 1 satisfies the component inequality with alpha = 2, lambda = 1/3
    auto p = make_quadratic_problem(3, 2, 0.5, 2.0, 1.0, 17);
    const int i = 1;
    const double lambda = 0.3;
    auto s = *p->component_minimizer(i);
    auto grid = assumption_grid(3, 10.0, 4000, &s);
    ASSERT_TRUE(check_assumption2_component(*p, i, 2.0, lambda, grid).pass);
    for (const auto& mass : {MassSchedule::exponential(0.8, lambda), MassSchedule::rational(0.9, lambda),
                             MassSchedule::exponential(0.5, 0.1)}) {
        ASSERT_TRUE(validate_assumption3(mass, lambda, uniform_grid(0.0, 20.0, 2001)).pass);
        Rng rng(2);
        PhaseState init{random_vector(3, rng, 2.0), random_vector(3, rng, 2.0), 0.0, -1};
        auto rec = integrate(SystemSpec::fixed_sample_decreasing_mass(i, mass), *p, init, 20.0);
        auto rep = time_dependent_decay(rec, mass, *p, i, lambda);
        EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    }
}

TEST(Bounds, ReportTightness) {
    TrajectoryRecord rec;
    rec.t = {0.0, 1.0};
    rec.q = {v1(1.0), v1(0.5)};
    rec.p = {v1(0.0), v1(-0.5)};
    rec.index = {0, 0};
    auto r = velocity_bound(rec, Vector::Zero(1), 1.0, 0.1);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.extra["max_lhs_over_rhs"].get<double>(), 0.5 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(coupling_constant(1.0), 14.0);
    rec.p[1] = v1(10.0);
    EXPECT_FALSE(velocity_bound(rec, Vector::Zero(1), 1.0, 0.1).pass);
}
