#include "sgmp/lyapunov.hpp"

#include <boost/random/sobol.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgmp {

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

constexpr double kSlack = 1e-8;

} // namespace

json CheckReport::to_json() const {
    json j = {{"max_violation", max_violation}, {"argmax_state", argmax_state}, {"pass", pass}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

double eval_V(const LyapunovParams& params, const FiniteSumProblem& problem, const Vector& x, const Vector& y) {
    const Vector d = x - params.theta_star;
    const Vector ya = y / params.alpha;
    const double a2 = params.alpha * params.alpha;
    return problem.value(x) - problem.value(params.theta_star) +
           0.25 * a2 * ((d + ya).squaredNorm() + ya.squaredNorm() - params.lambda * d.squaredNorm());
}

double eval_V_scaled(const FiniteSumProblem& problem, int component, double m, double lambda,
                     const Vector& theta_i, const Vector& x, const Vector& y) {
    const Vector d = x - theta_i;
    const Vector my = m * y;
    const double dphi = problem.component_value(component, x) - problem.component_value(component, theta_i);
    return dphi / m + ((d + my).squaredNorm() + my.squaredNorm() - m * lambda * d.squaredNorm()) / (4.0 * m * m);
}

double eval_V_time_dependent(const MassSchedule& mass, const FiniteSumProblem& problem, int component,
                             const Vector& theta_i, double t, const Vector& x, const Vector& y) {
    const double m = mass.mass(t);
    const Vector d = x - theta_i;
    const Vector my = m * y;
    const double dphi = problem.component_value(component, x) - problem.component_value(component, theta_i);
    return m * dphi + 0.25 * ((d + my).squaredNorm() + my.squaredNorm());
}

double energy_bound_constant(double alpha, double lambda) {
    return 4.0 + 8.0 / (alpha * alpha * (1.0 - 2.0 * lambda));
}

std::vector<Vector> assumption_grid(int K, double R, std::size_t max_points, const Vector* center) {
    if (K < 1 || max_points < 1) throw std::invalid_argument("grid needs K >= 1 and at least one point");
    std::vector<Vector> pts;
    Vector c = center ? *center : Vector::Zero(K);
    if (K <= 2) {
        const std::size_t side =
            K == 1 ? max_points : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(max_points))));
        auto coord = [&](std::size_t k) { return side == 1 ? 0.0 : -R + 2.0 * R * static_cast<double>(k) / (side - 1); };
        if (K == 1) {
            for (std::size_t a = 0; a < side; ++a) pts.push_back(c + Vector::Constant(1, coord(a)));
        } else {
            for (std::size_t a = 0; a < side; ++a)
                for (std::size_t b = 0; b < side; ++b) {
                    Vector v(2);
                    v << coord(a), coord(b);
                    pts.push_back(c + v);
                }
        }
        return pts;
    }
    boost::random::sobol gen(K);
    const double scale = static_cast<double>(gen.max() - gen.min()) + 1.0;
    for (std::size_t n = 0; n < max_points; ++n) {
        Vector v(K);
        for (int k = 0; k < K; ++k) v[k] = -R + 2.0 * R * (static_cast<double>(gen() - gen.min()) / scale);
        pts.push_back(c + v);
    }
    return pts;
}

namespace {

template <class Value, class Grad>
CheckReport assumption2_impl(const Vector& theta, double alpha, double lambda, const std::vector<Vector>& grid,
                             Value value, Grad grad) {
    CheckReport r;
    r.max_violation = -std::numeric_limits<double>::infinity();
    const double phi_star = value(theta);
    for (const auto& x : grid) {
        const Vector d = x - theta;
        const double lhs = 0.5 * d.dot(grad(x));
        const double rhs = lambda * (value(x) - phi_star + 0.25 * alpha * alpha * d.squaredNorm());
        const double v = rhs - lhs;
        if (v > r.max_violation) {
            r.max_violation = v;
            r.argmax_state = vec_json(x);
        }
    }
    r.pass = r.max_violation <= 1e-10;
    r.extra = {{"alpha", alpha}, {"lambda", lambda}, {"points", grid.size()}};
    return r;
}

} // namespace

CheckReport check_assumption2(const FiniteSumProblem& problem, double alpha, double lambda,
                              const std::vector<Vector>& grid) {
    if (!problem.minimizer()) throw std::invalid_argument("assumption 2 check needs theta_star");
    return assumption2_impl(
        *problem.minimizer(), alpha, lambda, grid, [&](const Vector& x) { return problem.value(x); },
        [&](const Vector& x) { return problem.gradient(x); });
}

CheckReport check_assumption2_component(const FiniteSumProblem& problem, int component, double alpha, double lambda,
                                        const std::vector<Vector>& grid) {
    auto theta = problem.component_minimizer(component);
    if (!theta) throw std::invalid_argument("component minimiser unknown");
    return assumption2_impl(
        *theta, alpha, lambda, grid, [&](const Vector& x) { return problem.component_value(component, x); },
        [&](const Vector& x) { return problem.component_gradient(component, x); });
}

CheckReport decay_certificate(const TrajectoryRecord& traj, const LyapunovParams& params,
                              const FiniteSumProblem& problem) {
    if (traj.size() == 0) throw std::invalid_argument("empty trajectory");
    if (traj.q.front().size() != problem.dimension() || params.theta_star.size() != problem.dimension())
        throw std::invalid_argument("trajectory/problem dimension mismatch");
    const double rate = params.alpha * params.lambda;
    const double C = energy_bound_constant(params.alpha, params.lambda);
    const double V0 = eval_V(params, problem, traj.q.front(), traj.p.front());
    const double tiny = 1e-300;

    double max_ratio = 0.0, energy_bound_violation = -std::numeric_limits<double>::infinity(), mono = 0.0;
    std::size_t ratio_at = 0, energy_bound_at = 0;
    double W_prev = V0;
    for (std::size_t s = 0; s < traj.size(); ++s) {
        const double V = eval_V(params, problem, traj.q[s], traj.p[s]);
        const double W = V * std::exp(rate * traj.t[s]);
        double ratio = V0 > tiny ? W / V0 : (W > tiny ? std::numeric_limits<double>::infinity() : 0.0);
        if (ratio > max_ratio) {
            max_ratio = ratio;
            ratio_at = s;
        }
        const double lhs = traj.p[s].squaredNorm() + (traj.q[s] - params.theta_star).squaredNorm();
        const double bound = C * std::exp(-rate * traj.t[s]) * V0;
        const double v = lhs - bound * (1.0 + kSlack);
        if (v > energy_bound_violation) {
            energy_bound_violation = v;
            energy_bound_at = s;
        }
        if (s > 0) mono = std::max(mono, W - W_prev);
        W_prev = W;
    }
    CheckReport r;
    const bool ratio_ok = max_ratio <= 1.0 + 1e-6;
    const bool energy_bound_ok = energy_bound_violation <= 0.0;
    const bool mono_ok = mono <= kSlack * std::max(V0, tiny);
    r.max_violation = max_ratio - 1.0;
    r.argmax_state = {{"t", traj.t[ratio_at]}, {"q", vec_json(traj.q[ratio_at])}, {"p", vec_json(traj.p[ratio_at])}};
    r.pass = ratio_ok && energy_bound_ok && mono_ok;
    r.extra = {{"max_ratio", max_ratio},
               {"ratio_pass", ratio_ok},
               {"energy_bound_max_violation", energy_bound_violation},
               {"energy_bound_at_t", traj.t[energy_bound_at]},
               {"energy_bound_pass", energy_bound_ok},
               {"monotone_max_increase", mono},
               {"monotone_pass", mono_ok},
               {"C", C},
               {"V0", V0}};
    return r;
}

CheckReport time_dependent_decay(const TrajectoryRecord& traj, const MassSchedule& mass,
                                 const FiniteSumProblem& problem, int component, double lambda) {
    auto theta = problem.component_minimizer(component);
    if (!theta) throw std::invalid_argument("component minimiser unknown");
    const double V0 = eval_V_time_dependent(mass, problem, component, *theta, traj.t.front(), traj.q.front(),
                                            traj.p.front());
    CheckReport r;
    double max_ratio = 0.0;
    std::size_t at = 0;
    for (std::size_t s = 0; s < traj.size(); ++s) {
        const double V = eval_V_time_dependent(mass, problem, component, *theta, traj.t[s], traj.q[s], traj.p[s]);
        const double ratio = V0 > 0.0 ? V * std::exp(lambda * traj.t[s]) / V0 : (V > 0.0 ? 1e300 : 0.0);
        if (ratio > max_ratio) {
            max_ratio = ratio;
            at = s;
        }
    }
    r.max_violation = max_ratio - 1.0;
    r.argmax_state = {{"t", traj.t[at]}};
    r.pass = max_ratio <= 1.0 + 1e-6;
    r.extra = {{"max_ratio", max_ratio}, {"V0", V0}, {"lambda", lambda}};
    return r;
}

namespace {

template <class Lhs, class Rhs>
CheckReport bound_check(const std::vector<double>& times, Lhs lhs, Rhs rhs) {
    CheckReport r;
    r.max_violation = -std::numeric_limits<double>::infinity();
    double tightest = 0.0;
    for (std::size_t s = 0; s < times.size(); ++s) {
        const double a = lhs(s), b = rhs(s);
        const double v = a - b * (1.0 + kSlack);
        if (v > r.max_violation) {
            r.max_violation = v;
            r.argmax_state = {{"t", times[s]}, {"lhs", a}, {"rhs", b}};
        }
        if (b > 0.0) tightest = std::max(tightest, a / b);
    }
    r.pass = r.max_violation <= 0.0;
    r.extra = {{"max_lhs_over_rhs", tightest}};
    return r;
}

} // namespace

CheckReport position_contraction_bound(const TrajectoryRecord& traj, const Vector& theta_i, double L, double lambda) {
    const double CL = L + 2.0;
    const double init = (traj.q.front() - theta_i).squaredNorm() + traj.p.front().squaredNorm();
    return bound_check(
        traj.t, [&](std::size_t s) { return (traj.q[s] - theta_i).squaredNorm(); },
        [&](std::size_t s) { return 16.0 * CL * std::exp(-lambda * traj.t[s]) * init; });
}

CheckReport velocity_bound(const TrajectoryRecord& traj, const Vector& theta_i, double L, double m) {
    const double CL = L + 2.0;
    const double p0 = traj.p.front().norm();
    const double d0 = (traj.q.front() - theta_i).norm();
    return bound_check(
        traj.t, [&](std::size_t s) { return traj.p[s].norm(); },
        [&](std::size_t s) { return (std::exp(-traj.t[s] / m) + m) * p0 + CL * d0; });
}

double coupling_constant(double L) { return 2.0 + 8.0 * L + 4.0 * L * L; }

CheckReport fixed_sample_coupling_bound(const std::vector<double>& times, const std::vector<double>& distance,
                                        double L, double m, const Vector& q0, const Vector& p0, const Vector& theta0,
                                        const Vector& theta_i) {
    const double C0 = coupling_constant(L);
    const double d0 = (q0 - theta0).norm();
    const double bracket = p0.norm() + d0 + (theta0 - theta_i).norm();
    return bound_check(
        times, [&](std::size_t s) { return distance[s]; },
        [&](std::size_t s) { return d0 + C0 * m * (1.0 + times[s]) * bracket; });
}

} // namespace sgmp
