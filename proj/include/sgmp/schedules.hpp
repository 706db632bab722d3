#pragma once

#include "sgmp/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sgmp {

class MassSchedule {
public:
    enum class Kind { Constant, Exponential, Rational, Geometric, Custom };

    static MassSchedule constant(double m0);
    // m0 * exp(-lambda t)
    static MassSchedule exponential(double m0, double lambda);
    // m0 / (1/lambda + t); note m(0) = m0 * lambda
    static MassSchedule rational(double m0, double lambda);
    // m0 * r^t in continuous time, m0 * r^n per discrete step
    static MassSchedule geometric(double m0, double r);
    static MassSchedule custom(std::function<double(double)> m, std::function<double(double)> dm,
                               std::string label = "custom");

    Kind kind() const { return kind_; }
    std::string kind_name() const;
    double m0() const { return m0_; }
    double lambda() const { return lambda_; }
    double ratio() const { return ratio_; }

    double mass(double t) const;
    double derivative(double t) const;
    // E(t) = int_0^t 1/m(s) ds
    double energy_integral(double t) const;
    double discrete_mass(long step, double h) const;
    // mass at the start of a step whose left end sits at time t
    double discrete_mass_at(long step, double t) const;

    json describe() const;
    static MassSchedule from_json(const json& j);

private:
    Kind kind_ = Kind::Constant;
    double m0_ = 1.0;
    double lambda_ = 0.0;
    double ratio_ = 1.0;
    std::function<double(double)> custom_m_;
    std::function<double(double)> custom_dm_;
    std::string label_;
};

struct Assumption3Report {
    double max_violation = 0.0;
    double location = 0.0;
    bool initial_ok = true;  // m(0) <= 1
    bool pass = true;
    json to_json() const;
};

// Checks |m'(t)| <= lambda m(t) over the grid and m(0) <= 1.
Assumption3Report validate_assumption3(const MassSchedule& schedule, double lambda, const std::vector<double>& grid);

std::vector<double> uniform_grid(double t0, double t1, std::size_t points);

class StepSchedule {
public:
    enum class Kind { Constant, Harmonic };

    static StepSchedule constant(double h);
    // h_n = h0 / n, n = 1, 2, ...
    static StepSchedule harmonic(double h0);

    Kind kind() const { return kind_; }
    double h0() const { return h0_; }
    double step(long n) const;

    json describe() const;
    static StepSchedule from_json(const json& j);

private:
    Kind kind_ = Kind::Constant;
    double h0_ = 1.0;
};

} // namespace sgmp
