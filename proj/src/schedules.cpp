#include "sgmp/schedules.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

namespace sgmp {

MassSchedule MassSchedule::constant(double m0) {
    if (!(m0 >= 0.0)) throw std::invalid_argument("mass must be non-negative");
    MassSchedule s;
    s.kind_ = Kind::Constant;
    s.m0_ = m0;
    return s;
}

MassSchedule MassSchedule::exponential(double m0, double lambda) {
    if (!(m0 > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("exponential schedule needs m0, lambda > 0");
    MassSchedule s;
    s.kind_ = Kind::Exponential;
    s.m0_ = m0;
    s.lambda_ = lambda;
    return s;
}

MassSchedule MassSchedule::rational(double m0, double lambda) {
    if (!(m0 > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("rational schedule needs m0, lambda > 0");
    MassSchedule s;
    s.kind_ = Kind::Rational;
    s.m0_ = m0;
    s.lambda_ = lambda;
    return s;
}

MassSchedule MassSchedule::geometric(double m0, double r) {
    if (!(m0 > 0.0) || !(r > 0.0 && r <= 1.0)) throw std::invalid_argument("geometric schedule needs m0 > 0, 0 < r <= 1");
    MassSchedule s;
    s.kind_ = Kind::Geometric;
    s.m0_ = m0;
    s.ratio_ = r;
    s.lambda_ = -std::log(r);
    return s;
}

MassSchedule MassSchedule::custom(std::function<double(double)> m, std::function<double(double)> dm,
                                  std::string label) {
    MassSchedule s;
    s.kind_ = Kind::Custom;
    s.custom_m_ = std::move(m);
    s.custom_dm_ = std::move(dm);
    s.m0_ = s.custom_m_(0.0);
    s.label_ = std::move(label);
    return s;
}

std::string MassSchedule::kind_name() const {
    switch (kind_) {
    case Kind::Constant: return "constant";
    case Kind::Exponential: return "exponential";
    case Kind::Rational: return "rational";
    case Kind::Geometric: return "geometric";
    case Kind::Custom: return "custom";
    }
    return "unknown";
}

double MassSchedule::mass(double t) const {
    switch (kind_) {
    case Kind::Constant: return m0_;
    case Kind::Exponential: return m0_ * std::exp(-lambda_ * t);
    case Kind::Rational: return m0_ / (1.0 / lambda_ + t);
    case Kind::Geometric: return m0_ * std::pow(ratio_, t);
    case Kind::Custom: return custom_m_(t);
    }
    return m0_;
}

double MassSchedule::derivative(double t) const {
    switch (kind_) {
    case Kind::Constant: return 0.0;
    case Kind::Exponential: return -lambda_ * mass(t);
    case Kind::Rational: {
        double d = 1.0 / lambda_ + t;
        return -m0_ / (d * d);
    }
    case Kind::Geometric: return -lambda_ * mass(t);
    case Kind::Custom: return custom_dm_(t);
    }
    return 0.0;
}

double MassSchedule::energy_integral(double t) const {
    if (t < 0.0) throw std::invalid_argument("energy integral needs t >= 0");
    switch (kind_) {
    case Kind::Constant: return t / m0_;
    case Kind::Exponential:
    case Kind::Geometric: return std::expm1(lambda_ * t) / (m0_ * lambda_);
    case Kind::Rational: return (t / lambda_ + 0.5 * t * t) / m0_;
    case Kind::Custom: break;
    }
    if (t == 0.0) return 0.0;
    auto f = [this](double s) {
        double v = 1.0 / custom_m_(s);
        if (!std::isfinite(v)) throw std::domain_error("non-finite 1/m(t) in energy integral");
        return v;
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t, 20, 1e-13);
}

double MassSchedule::discrete_mass(long step, double h) const {
    if (kind_ == Kind::Geometric) return m0_ * std::pow(ratio_, static_cast<double>(step));
    return mass(static_cast<double>(step) * h);
}

double MassSchedule::discrete_mass_at(long step, double t) const {
    if (kind_ == Kind::Geometric) return m0_ * std::pow(ratio_, static_cast<double>(step));
    return mass(t);
}

json MassSchedule::describe() const {
    json j = {{"kind", kind_name()}, {"m0", m0_}};
    if (kind_ == Kind::Exponential || kind_ == Kind::Rational) j["lambda"] = lambda_;
    if (kind_ == Kind::Geometric) j["r"] = ratio_;
    if (kind_ == Kind::Custom) j["label"] = label_;
    return j;
}

MassSchedule MassSchedule::from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    const double m0 = j.at("m0").get<double>();
    if (kind == "constant") return constant(m0);
    if (kind == "exponential") return exponential(m0, j.at("lambda").get<double>());
    if (kind == "rational") return rational(m0, j.at("lambda").get<double>());
    if (kind == "geometric") return geometric(m0, j.at("r").get<double>());
    throw std::invalid_argument("mass schedule kind not constructible from JSON: " + kind);
}

json Assumption3Report::to_json() const {
    return {{"max_violation", max_violation}, {"argmax_state", location}, {"initial_ok", initial_ok}, {"pass", pass}};
}

Assumption3Report validate_assumption3(const MassSchedule& schedule, double lambda, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("grid must be non-empty");
    Assumption3Report r;
    r.location = grid.front();
    for (double t : grid) {
        double v = std::abs(schedule.derivative(t)) - lambda * schedule.mass(t);
        if (v > r.max_violation) {
            r.max_violation = v;
            r.location = t;
        }
    }
    r.initial_ok = schedule.mass(0.0) <= 1.0;
    r.pass = r.max_violation <= 1e-12 && r.initial_ok;
    return r;
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t points) {
    std::vector<double> g(points);
    if (points == 1) {
        g[0] = t0;
        return g;
    }
    for (std::size_t k = 0; k < points; ++k) g[k] = t0 + (t1 - t0) * static_cast<double>(k) / (points - 1);
    return g;
}

StepSchedule StepSchedule::constant(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
    StepSchedule s;
    s.kind_ = Kind::Constant;
    s.h0_ = h;
    return s;
}

StepSchedule StepSchedule::harmonic(double h0) {
    if (!(h0 > 0.0)) throw std::invalid_argument("step size must be positive");
    StepSchedule s;
    s.kind_ = Kind::Harmonic;
    s.h0_ = h0;
    return s;
}

double StepSchedule::step(long n) const {
    if (kind_ == Kind::Constant) return h0_;
    if (n < 1) throw std::invalid_argument("harmonic steps are indexed from 1");
    return h0_ / static_cast<double>(n);
}

json StepSchedule::describe() const {
    return {{"kind", kind_ == Kind::Constant ? "constant" : "harmonic"}, {"h0", h0_}};
}

StepSchedule StepSchedule::from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "constant") return constant(j.at("h0").get<double>());
    if (kind == "harmonic") return harmonic(j.at("h0").get<double>());
    throw std::invalid_argument("unknown step schedule: " + kind);
}

} // namespace sgmp
