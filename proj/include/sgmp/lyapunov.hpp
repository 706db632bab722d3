#pragma once

#include "sgmp/problems.hpp"
#include "sgmp/schedules.hpp"
#include "sgmp/simulator.hpp"

#include <vector>

namespace sgmp {

struct LyapunovParams {
    double alpha = 1.0;
    double lambda = 0.25;
    Vector theta_star;
};

struct CheckReport {
    double max_violation = 0.0;
    json argmax_state;
    bool pass = true;
    json extra = json::object();

    json to_json() const;
};

// V(x,y) = Phi(x) - Phi(theta) + alpha^2/4 (|x - theta + y/alpha|^2 + |y/alpha|^2 - lambda |x - theta|^2)
double eval_V(const LyapunovParams& params, const FiniteSumProblem& problem, const Vector& x, const Vector& y);

// V^{i,m}: (Phi_i - Phi_i*)/m + (|x - theta + m y|^2 + |m y|^2 - m lambda |x - theta|^2) / (4 m^2)
double eval_V_scaled(const FiniteSumProblem& problem, int component, double m, double lambda,
                     const Vector& theta_i, const Vector& x, const Vector& y);

// V^i(t,x,y) = m(t)(Phi_i - Phi_i*) + (|x - theta + m(t) y|^2 + |m(t) y|^2) / 4
double eval_V_time_dependent(const MassSchedule& mass, const FiniteSumProblem& problem, int component,
                             const Vector& theta_i, double t, const Vector& x, const Vector& y);

double energy_bound_constant(double alpha, double lambda);

// Dense grid for K <= 2, Sobol points otherwise; hypercube [-R, R]^K shifted by center.
std::vector<Vector> assumption_grid(int K, double R = 10.0, std::size_t max_points = 10000,
                                    const Vector* center = nullptr);

// max over grid of lambda(Phi - Phi* + alpha^2 |x - theta|^2 / 4) - (x - theta).grad / 2; pass iff <= 1e-10.
CheckReport check_assumption2(const FiniteSumProblem& problem, double alpha, double lambda,
                              const std::vector<Vector>& grid);

// Same inequality for a single component around its own minimiser.
CheckReport check_assumption2_component(const FiniteSumProblem& problem, int component, double alpha, double lambda,
                                        const std::vector<Vector>& grid);

// Endpoint ratio, energy bound and monotonicity of V e^{alpha lambda t} along a trajectory.
CheckReport decay_certificate(const TrajectoryRecord& trajectory, const LyapunovParams& params,
                              const FiniteSumProblem& problem);

// V^i(t) <= e^{-lambda t} V^i(0) along a fixed-sample decreasing-mass trajectory.
CheckReport time_dependent_decay(const TrajectoryRecord& trajectory, const MassSchedule& mass,
                                 const FiniteSumProblem& problem, int component, double lambda);

// |q - theta_i|^2 <= 16 (L + 2) e^{-lambda t} (|q0 - theta_i|^2 + |p0|^2)
CheckReport position_contraction_bound(const TrajectoryRecord& trajectory, const Vector& theta_i, double L,
                                       double lambda);

// |p_t| <= (e^{-t/m} + m)|p0| + (L + 2)|q0 - theta_i|
CheckReport velocity_bound(const TrajectoryRecord& trajectory, const Vector& theta_i, double L, double m);

double coupling_constant(double L);  // 2 + 8L + 4L^2

// |q - theta| <= |q0 - theta0| + C m (1 + t)(|p0| + |q0 - theta0| + |theta0 - theta_i|)
CheckReport fixed_sample_coupling_bound(const std::vector<double>& times, const std::vector<double>& distance,
                                        double L, double m, const Vector& q0, const Vector& p0, const Vector& theta0,
                                        const Vector& theta_i);

} // namespace sgmp
