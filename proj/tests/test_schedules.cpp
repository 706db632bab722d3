#include "sgmp/schedules.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sgmp;

namespace {

// Independent oracle: composite Simpson on a fine grid.
double simpson(const MassSchedule& s, double t, int n = 20000) {
    const double h = t / n;
    double acc = 1.0 / s.mass(0.0) + 1.0 / s.mass(t);
    for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) / s.mass(k * h);
    return acc * h / 3.0;
}

} // namespace

TEST(MassSchedule, EnergyIntegralClosedForms) {
    auto c = MassSchedule::constant(0.25);
    EXPECT_DOUBLE_EQ(c.energy_integral(3.0), 12.0);

    auto e = MassSchedule::exponential(0.5, 0.3);
    auto r = MassSchedule::rational(0.8, 0.4);
    for (double t : {0.0, 0.5, 3.0, 10.0, 20.0}) {
        EXPECT_NEAR(e.energy_integral(t), (std::exp(0.3 * t) - 1.0) / (0.5 * 0.3), 1e-12 * std::exp(0.3 * t));
        EXPECT_NEAR(r.energy_integral(t), (t / 0.4 + 0.5 * t * t) / 0.8, 1e-12);
        if (t > 0) {
            EXPECT_NEAR(e.energy_integral(t), simpson(e, t), 1e-9 * std::max(1.0, simpson(e, t)));
            EXPECT_NEAR(r.energy_integral(t), simpson(r, t), 1e-9 * std::max(1.0, simpson(r, t)));
        }
    }
}

TEST(MassSchedule, CustomUsesQuadrature) {
    auto s = MassSchedule::custom([](double t) { return 1.0 / (1.0 + t * t); },
                                  [](double t) { return -2.0 * t / ((1.0 + t * t) * (1.0 + t * t)); });
    for (double t : {0.5, 2.0, 20.0}) EXPECT_NEAR(s.energy_integral(t), t + t * t * t / 3.0, 1e-10 * (1 + t * t * t));
    EXPECT_EQ(s.energy_integral(0.0), 0.0);
}

TEST(MassSchedule, EnergyIntegralIncreasing) {
    for (const auto& s : {MassSchedule::constant(0.3), MassSchedule::exponential(0.9, 0.2),
                          MassSchedule::rational(1.0, 1.0), MassSchedule::geometric(0.1, 0.9)}) {
        double prev = s.energy_integral(0.0);
        EXPECT_EQ(prev, 0.0);
        for (double t = 0.1; t <= 20.0; t += 0.1) {
            double v = s.energy_integral(t);
            EXPECT_GT(v, prev);
            prev = v;
        }
    }
}

TEST(MassSchedule, DecayRateCondition) {
    auto grid = uniform_grid(0.0, 50.0, 5001);
    const double lambda = 0.3;
    auto e = validate_assumption3(MassSchedule::exponential(0.7, lambda), lambda, grid);
    EXPECT_TRUE(e.pass);
    EXPECT_EQ(e.max_violation, 0.0);
    EXPECT_TRUE(validate_assumption3(MassSchedule::rational(0.9, lambda), lambda, grid).pass);
    auto fast = validate_assumption3(MassSchedule::exponential(0.7, 2 * lambda), lambda, grid);
    EXPECT_FALSE(fast.pass);
    EXPECT_EQ(fast.location, 0.0);
    EXPECT_FALSE(validate_assumption3(MassSchedule::constant(2.0), lambda, grid).pass);
}

TEST(MassSchedule, LowerEnvelopeAndMonotone) {
    const double lambda = 0.5;
    for (const auto& s : {MassSchedule::exponential(0.6, lambda), MassSchedule::rational(0.6, lambda)}) {
        const double m0 = s.mass(0.0);
        double prev = m0;
        for (double t = 0.05; t <= 30.0; t += 0.05) {
            EXPECT_GE(s.mass(t), m0 * std::exp(-lambda * t) * (1 - 1e-15));
            EXPECT_LT(s.mass(t), prev);
            EXPECT_GT(s.mass(t), 0.0);
            prev = s.mass(t);
        }
    }
}

TEST(MassSchedule, DiscreteMass) {
    auto c = MassSchedule::constant(0.4);
    EXPECT_EQ(c.discrete_mass(0, 0.1), 0.4);
    EXPECT_EQ(c.discrete_mass(1234, 0.1), 0.4);
    auto g = MassSchedule::geometric(0.1, 0.995);
    EXPECT_EQ(g.discrete_mass(0, 0.3), 0.1);
    EXPECT_NEAR(g.discrete_mass(200, 0.3), 0.1 * std::pow(0.995, 200), 1e-17);
    const double lambda = 0.7, h = 0.05;
    auto ge = MassSchedule::geometric(0.9, std::exp(-lambda * h));
    auto ex = MassSchedule::exponential(0.9, lambda);
    for (long n = 0; n < 400; n += 7) EXPECT_NEAR(ge.discrete_mass(n, h), ex.discrete_mass(n, h), 1e-14);
}

TEST(MassSchedule, JsonRoundTrip) {
    for (const auto& s : {MassSchedule::constant(0.3), MassSchedule::exponential(0.9, 0.2),
                          MassSchedule::rational(1.0, 0.5), MassSchedule::geometric(0.1, 0.995)}) {
        auto b = MassSchedule::from_json(s.describe());
        EXPECT_EQ(b.mass(1.7), s.mass(1.7));
        EXPECT_EQ(b.kind(), s.kind());
    }
}

TEST(StepSchedule, HarmonicStartsAtOne) {
    auto h = StepSchedule::harmonic(0.5);
    EXPECT_EQ(h.step(1), 0.5);
    EXPECT_EQ(h.step(4), 0.125);
    EXPECT_THROW(h.step(0), std::invalid_argument);
    auto c = StepSchedule::constant(0.2);
    EXPECT_EQ(c.step(1), 0.2);
    EXPECT_EQ(c.step(99), 0.2);
    EXPECT_EQ(StepSchedule::from_json(h.describe()).step(3), h.step(3));
}
