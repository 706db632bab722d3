#pragma once

#include "sgmp/index_process.hpp"
#include "sgmp/problems.hpp"
#include "sgmp/schedules.hpp"

#include <string>
#include <vector>

namespace sgmp {

struct PhaseState {
    Vector q;
    Vector p;
    double t = 0.0;
    int index = -1;  // -1 when the full gradient drives the system
};

enum class SystemKind {
    GradientFlow,
    SGP,
    SGPDecayingRate,
    UnderdampedFlow,
    HSGMP,
    DMSGMP,
    DDSGMP,
    FixedSampleMomentum,
    FixedSampleDecreasingMass
};

std::string system_kind_name(SystemKind k);

class SystemSpec {
public:
    // d theta = -grad Phi_bar, or -grad Phi_i when component >= 0
    static SystemSpec gradient_flow(int component = -1);
    // d theta = -grad Phi_{i(t)}
    static SystemSpec sgp();
    // SGP driven by i(t / nu); the m -> 0 partner of hSGMP with nu = m^delta
    static SystemSpec sgp_rate(double nu);
    // d xi = -grad Phi_{i(beta(t))}
    static SystemSpec sgp_decaying_rate(const TimeChange& tc);
    // m(t) dp = -grad Phi_bar - alpha p
    static SystemSpec underdamped(const MassSchedule& mass, double alpha);
    // constant m, alpha, index process i(t / nu)
    static SystemSpec hsgmp(double m, double nu, double alpha);
    // constant m, alpha = 1, nu = m^delta
    static SystemSpec hsgmp_mass(double m, double delta);
    // decreasing m(t), alpha = 1
    static SystemSpec dmsgmp(const MassSchedule& mass);
    // decreasing m(t), alpha = 1, index process i(beta(t))
    static SystemSpec ddsgmp(const MassSchedule& mass, const TimeChange& tc);
    // m dp = -grad Phi_i - alpha p, fixed i
    static SystemSpec fixed_sample_momentum(int component, double m, double alpha = 1.0);
    // m(t) dp = -grad Phi_i - p, fixed i
    static SystemSpec fixed_sample_decreasing_mass(int component, const MassSchedule& mass);

    SystemKind kind() const { return kind_; }
    bool second_order() const;
    bool stochastic() const;
    bool constant_mass() const;
    double alpha() const { return alpha_; }
    const MassSchedule& mass() const { return mass_; }
    const TimeChange& time_change() const { return time_change_; }
    int component() const { return component_; }

    json describe() const;

private:
    SystemKind kind_ = SystemKind::GradientFlow;
    double alpha_ = 1.0;
    MassSchedule mass_ = MassSchedule::constant(1.0);
    TimeChange time_change_ = TimeChange::identity();
    int component_ = -1;
    double delta_ = 0.0;
};

struct IntegratorOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    std::size_t samples = 1000;  // uniform intervals on [0, horizon]
    std::vector<double> extra_times;
    bool record_jumps = true;
    double initial_step = 1e-3;
    double min_step = 1e-12;
    // Semi-implicit reference step used when the stiffness guard underflows.
    double fallback_step = 1e-6;
    bool stiffness_guard = true;
};

struct TrajectoryRecord {
    std::vector<double> t;
    std::vector<Vector> q;
    std::vector<Vector> p;
    std::vector<int> index;
    json meta;
    long steps = 0;
    bool used_fallback = false;

    std::size_t size() const { return t.size(); }
    void write_csv(const std::string& path) const;
    void write_sidecar(const std::string& path) const;
    static TrajectoryRecord read_csv(const std::string& path);
};

class StepUnderflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The raw skeleton is in index-process time; each system applies its own time change.
TrajectoryRecord integrate(const SystemSpec& system, const FiniteSumProblem& problem, const JumpSkeleton& raw,
                           const PhaseState& initial, double horizon, const IntegratorOptions& opts = {});

// Deterministic kinds need no skeleton.
TrajectoryRecord integrate(const SystemSpec& system, const FiniteSumProblem& problem, const PhaseState& initial,
                           double horizon, const IntegratorOptions& opts = {});

struct CoupledResult {
    std::vector<TrajectoryRecord> records;
    std::vector<double> times;
    // distance[k][s] = |q^0(t_s) - q^{k+1}(t_s)|
    std::vector<std::vector<double>> distance;
    std::vector<double> sup_distance;
};

// All trajectories share one raw skeleton and a common sample grid.
CoupledResult integrate_coupled(const std::vector<SystemSpec>& systems, const FiniteSumProblem& problem,
                                const JumpSkeleton& raw, const std::vector<PhaseState>& initials, double horizon,
                                const IntegratorOptions& opts = {});

// Closed-form piecewise solution via the matrix exponential of the affine system.
TrajectoryRecord exact_piecewise_quadratic(const SystemSpec& system, const FiniteSumProblem& problem,
                                           const JumpSkeleton& raw, const PhaseState& initial, double horizon,
                                           const std::vector<double>& sample_times);

// Time at which the first skeleton covers `horizon` for this system.
double raw_horizon_needed(const SystemSpec& system, double horizon);

} // namespace sgmp
