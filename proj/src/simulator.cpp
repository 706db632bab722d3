#include "sgmp/simulator.hpp"

#include "sgmp/optimizers.hpp"

#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sgmp {

namespace odeint = boost::numeric::odeint;

std::string system_kind_name(SystemKind k) {
    switch (k) {
    case SystemKind::GradientFlow: return "gradient_flow";
    case SystemKind::SGP: return "sgp";
    case SystemKind::SGPDecayingRate: return "sgp_decaying_rate";
    case SystemKind::UnderdampedFlow: return "underdamped_flow";
    case SystemKind::HSGMP: return "hsgmp";
    case SystemKind::DMSGMP: return "dmsgmp";
    case SystemKind::DDSGMP: return "ddsgmp";
    case SystemKind::FixedSampleMomentum: return "fixed_sample_momentum";
    case SystemKind::FixedSampleDecreasingMass: return "fixed_sample_decreasing_mass";
    }
    return "unknown";
}

SystemSpec SystemSpec::gradient_flow(int component) {
    SystemSpec s;
    s.kind_ = SystemKind::GradientFlow;
    s.component_ = component;
    return s;
}

SystemSpec SystemSpec::sgp() {
    SystemSpec s;
    s.kind_ = SystemKind::SGP;
    return s;
}

SystemSpec SystemSpec::sgp_rate(double nu) {
    SystemSpec s;
    s.kind_ = SystemKind::SGP;
    s.time_change_ = TimeChange::linear(nu);
    return s;
}

SystemSpec SystemSpec::sgp_decaying_rate(const TimeChange& tc) {
    SystemSpec s;
    s.kind_ = SystemKind::SGPDecayingRate;
    s.time_change_ = tc;
    return s;
}

SystemSpec SystemSpec::underdamped(const MassSchedule& mass, double alpha) {
    if (!(mass.m0() > 0.0)) throw std::invalid_argument("underdamped flow needs positive mass");
    SystemSpec s;
    s.kind_ = SystemKind::UnderdampedFlow;
    s.mass_ = mass;
    s.alpha_ = alpha;
    return s;
}

SystemSpec SystemSpec::hsgmp(double m, double nu, double alpha) {
    if (!(m > 0.0)) throw std::invalid_argument("hSGMP needs positive mass");
    SystemSpec s;
    s.kind_ = SystemKind::HSGMP;
    s.mass_ = MassSchedule::constant(m);
    s.alpha_ = alpha;
    s.time_change_ = nu == 1.0 ? TimeChange::identity() : TimeChange::linear(nu);
    return s;
}

SystemSpec SystemSpec::hsgmp_mass(double m, double delta) {
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
    SystemSpec s = hsgmp(m, std::pow(m, delta), 1.0);
    s.delta_ = delta;
    return s;
}

SystemSpec SystemSpec::dmsgmp(const MassSchedule& mass) {
    SystemSpec s;
    s.kind_ = SystemKind::DMSGMP;
    s.mass_ = mass;
    return s;
}

SystemSpec SystemSpec::ddsgmp(const MassSchedule& mass, const TimeChange& tc) {
    SystemSpec s;
    s.kind_ = SystemKind::DDSGMP;
    s.mass_ = mass;
    s.time_change_ = tc;
    return s;
}

SystemSpec SystemSpec::fixed_sample_momentum(int component, double m, double alpha) {
    if (component < 0) throw std::invalid_argument("fixed-sample system needs a component index");
    if (!(m > 0.0)) throw std::invalid_argument("fixed-sample momentum needs positive mass");
    SystemSpec s;
    s.kind_ = SystemKind::FixedSampleMomentum;
    s.component_ = component;
    s.mass_ = MassSchedule::constant(m);
    s.alpha_ = alpha;
    return s;
}

SystemSpec SystemSpec::fixed_sample_decreasing_mass(int component, const MassSchedule& mass) {
    if (component < 0) throw std::invalid_argument("fixed-sample system needs a component index");
    SystemSpec s;
    s.kind_ = SystemKind::FixedSampleDecreasingMass;
    s.component_ = component;
    s.mass_ = mass;
    return s;
}

bool SystemSpec::second_order() const {
    return !(kind_ == SystemKind::GradientFlow || kind_ == SystemKind::SGP || kind_ == SystemKind::SGPDecayingRate);
}

bool SystemSpec::stochastic() const {
    return kind_ == SystemKind::SGP || kind_ == SystemKind::SGPDecayingRate || kind_ == SystemKind::HSGMP ||
           kind_ == SystemKind::DMSGMP || kind_ == SystemKind::DDSGMP;
}

bool SystemSpec::constant_mass() const {
    return second_order() && mass_.kind() == MassSchedule::Kind::Constant;
}

json SystemSpec::describe() const {
    json j = {{"kind", system_kind_name(kind_)}};
    if (second_order()) {
        j["alpha"] = alpha_;
        j["mass"] = mass_.describe();
    }
    if (stochastic()) j["time_change"] = time_change_.describe();
    if (component_ >= 0) j["component"] = component_ + 1;
    if (kind_ == SystemKind::HSGMP && delta_ > 0.0) j["delta"] = delta_;
    return j;
}

double raw_horizon_needed(const SystemSpec& system, double horizon) { return system.time_change().beta(horizon); }

namespace {

struct RecordPoint {
    double t;
    bool record;
};

std::vector<RecordPoint> build_points(double horizon, const IntegratorOptions& opts, const std::vector<double>& jumps) {
    std::vector<RecordPoint> pts;
    const std::size_t n = std::max<std::size_t>(opts.samples, 1);
    for (std::size_t k = 0; k <= n; ++k) pts.push_back({horizon * static_cast<double>(k) / n, true});
    pts.back().t = horizon;
    for (double t : opts.extra_times)
        if (t >= 0.0 && t <= horizon) pts.push_back({t, true});
    for (double t : jumps)
        if (t > 0.0 && t < horizon) pts.push_back({t, opts.record_jumps});
    std::sort(pts.begin(), pts.end(), [](const RecordPoint& a, const RecordPoint& b) { return a.t < b.t; });
    std::vector<RecordPoint> out;
    for (const auto& p : pts) {
        if (!out.empty() && out.back().t == p.t) {
            out.back().record = out.back().record || p.record;
        } else {
            out.push_back(p);
        }
    }
    return out;
}

class Integrator {
public:
    Integrator(const SystemSpec& sys, const FiniteSumProblem& prob, const IntegratorOptions& opts)
        : sys_(sys), prob_(prob), opts_(opts), K_(prob.dimension()), dt_(opts.initial_step),
          stepper_(odeint::make_controlled(opts.abs_tol, opts.rel_tol, Stepper())) {}

    Vector grad(int idx, const Vector& q) const {
        return idx < 0 ? prob_.gradient(q) : prob_.component_gradient(idx, q);
    }

    // Advances x from t to exactly t_end with the active index held fixed.
    void advance(Vector& x, double& t, double t_end, int idx, TrajectoryRecord& rec) {
        stepper_.reset();
        auto rhs = [&](const Vector& z, Vector& dz, double s) {
            dz.resize(z.size());
            if (!sys_.second_order()) {
                dz = -grad(idx, z);
                return;
            }
            const auto q = z.head(K_);
            const auto p = z.tail(K_);
            dz.head(K_) = p;
            dz.tail(K_) = (-grad(idx, q) - sys_.alpha() * p) / sys_.mass().mass(s);
        };
        while (t < t_end) {
            double dt_try = std::min(dt_, t_end - t);
            bool to_end = dt_try == t_end - t;
            if (sys_.second_order() && opts_.stiffness_guard) {
                const double m = sys_.mass().mass(t);
                if (m < 100.0 * dt_try && m / 20.0 < dt_try) {
                    dt_try = m / 20.0;
                    to_end = false;
                }
            }
            if (dt_try < opts_.min_step) {
                fallback(x, t, t_end, idx, rec);
                return;
            }
            const double t_old = t;
            double dt_new = dt_try;
            auto res = stepper_.try_step(rhs, x, t, dt_new);
            if (res == odeint::success) {
                ++rec.steps;
                if (to_end) t = t_end;
                dt_ = (dt_try < dt_) ? std::max(dt_, dt_new) : dt_new;
                if (!x.allFinite()) throw std::runtime_error("non-finite state at t=" + std::to_string(t));
            } else {
                t = t_old;
                dt_ = dt_new;
                if (dt_ < opts_.min_step)
                    throw StepUnderflow("step size underflow at t=" + std::to_string(t) +
                                        "; switch to a semi-implicit reference integrator");
            }
        }
    }

    PhaseState state(const Vector& x, double t, int idx) const {
        PhaseState s;
        s.t = t;
        s.index = idx;
        if (sys_.second_order()) {
            s.q = x.head(K_);
            s.p = x.tail(K_);
        } else {
            s.q = x;
            s.p = -grad(idx, x);
        }
        return s;
    }

private:
    void fallback(Vector& x, double& t, double t_end, int idx, TrajectoryRecord& rec) {
        rec.used_fallback = true;
        Vector q = x.head(K_), p = x.tail(K_);
        while (t < t_end) {
            double h = std::min(opts_.fallback_step, t_end - t);
            bool last = h == t_end - t;
            std::tie(q, p) = semi_implicit_step(q, p, grad(idx, q), sys_.mass().mass(t), h, sys_.alpha());
            t = last ? t_end : t + h;
            ++rec.steps;
        }
        x.head(K_) = q;
        x.tail(K_) = p;
        stepper_.reset();
    }

    using Stepper = odeint::runge_kutta_dopri5<Vector, double, Vector, double, odeint::vector_space_algebra>;
    using Controlled = decltype(odeint::make_controlled(1e-9, 1e-9, Stepper()));

    const SystemSpec& sys_;
    const FiniteSumProblem& prob_;
    const IntegratorOptions& opts_;
    int K_;
    double dt_;
    Controlled stepper_;
};

int active_index(const SystemSpec& sys, const JumpSkeleton* sk, double t) {
    if (sys.stochastic()) return sk->index_at(t);
    return sys.component();
}

void check_initial(const SystemSpec& sys, const FiniteSumProblem& prob, const PhaseState& init) {
    if (init.q.size() != prob.dimension()) throw std::invalid_argument("initial q has wrong dimension");
    if (sys.second_order() && init.p.size() != prob.dimension())
        throw std::invalid_argument("initial p has wrong dimension");
    if (sys.component() >= prob.count()) throw std::invalid_argument("component index out of range");
}

JumpSkeleton system_skeleton(const SystemSpec& sys, const JumpSkeleton& raw, double horizon) {
    JumpSkeleton sk = rescale_skeleton(raw, sys.time_change());
    if (sk.horizon < horizon * (1.0 - 1e-12))
        throw std::invalid_argument("skeleton horizon " + std::to_string(sk.horizon) +
                                    " does not cover integration horizon " + std::to_string(horizon));
    return sk;
}

json integrator_meta(const SystemSpec& sys, const IntegratorOptions& opts, double horizon, const JumpSkeleton* sk) {
    json m = {{"system", sys.describe()},
              {"horizon", horizon},
              {"integrator",
               {{"method", "dopri5"},
                {"abs_tol", opts.abs_tol},
                {"rel_tol", opts.rel_tol},
                {"samples", opts.samples},
                {"stiffness_guard", opts.stiffness_guard}}}};
    if (sk) m["skeleton"] = {{"jumps", sk->jumps()}, {"horizon", sk->horizon}};
    return m;
}

TrajectoryRecord run(const SystemSpec& sys, const FiniteSumProblem& prob, const JumpSkeleton* sk,
                     const PhaseState& init, double horizon, const IntegratorOptions& opts) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    check_initial(sys, prob, init);
    const int K = prob.dimension();
    std::vector<double> jumps;
    if (sk) jumps = sk->jump_times;
    auto pts = build_points(horizon, opts, jumps);

    Integrator integ(sys, prob, opts);
    TrajectoryRecord rec;
    rec.meta = integrator_meta(sys, opts, horizon, sk);
    Vector x(sys.second_order() ? 2 * K : K);
    x.head(K) = init.q;
    if (sys.second_order()) x.tail(K) = init.p;
    double t = 0.0;

    auto push = [&](int idx) {
        PhaseState s = integ.state(x, t, idx);
        rec.t.push_back(t);
        rec.q.push_back(std::move(s.q));
        rec.p.push_back(std::move(s.p));
        rec.index.push_back(idx);
    };
    if (pts.front().record) push(active_index(sys, sk, 0.0));
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const int idx = active_index(sys, sk, t);
        integ.advance(x, t, pts[k].t, idx, rec);
        if (pts[k].record) push(active_index(sys, sk, t));
    }
    rec.meta["steps"] = rec.steps;
    rec.meta["used_fallback"] = rec.used_fallback;
    return rec;
}

} // namespace

TrajectoryRecord integrate(const SystemSpec& system, const FiniteSumProblem& problem, const JumpSkeleton& raw,
                           const PhaseState& initial, double horizon, const IntegratorOptions& opts) {
    if (!system.stochastic()) return run(system, problem, nullptr, initial, horizon, opts);
    JumpSkeleton sk = system_skeleton(system, raw, horizon);
    return run(system, problem, &sk, initial, horizon, opts);
}

TrajectoryRecord integrate(const SystemSpec& system, const FiniteSumProblem& problem, const PhaseState& initial,
                           double horizon, const IntegratorOptions& opts) {
    if (system.stochastic()) throw std::invalid_argument("stochastic system needs a jump skeleton");
    return run(system, problem, nullptr, initial, horizon, opts);
}

CoupledResult integrate_coupled(const std::vector<SystemSpec>& systems, const FiniteSumProblem& problem,
                                const JumpSkeleton& raw, const std::vector<PhaseState>& initials, double horizon,
                                const IntegratorOptions& opts) {
    if (systems.empty() || systems.size() != initials.size())
        throw std::invalid_argument("need one initial state per system");
    // Union of every system's jump times, so all records share one grid.
    IntegratorOptions common = opts;
    for (const auto& s : systems) {
        if (!s.stochastic() && s.component() < 0 && s.kind() != SystemKind::UnderdampedFlow &&
            s.kind() != SystemKind::GradientFlow)
            throw std::invalid_argument("coupled systems must be stochastic or deterministic references");
        if (!s.stochastic()) continue;
        JumpSkeleton sk = system_skeleton(s, raw, horizon);
        for (double t : sk.jump_times)
            if (t > 0.0 && t < horizon) common.extra_times.push_back(t);
    }
    CoupledResult out;
    out.records.resize(systems.size());
    for (std::size_t k = 0; k < systems.size(); ++k)
        out.records[k] = integrate(systems[k], problem, raw, initials[k], horizon, common);
    out.times = out.records.front().t;
    for (std::size_t k = 1; k < systems.size(); ++k) {
        const auto& a = out.records.front();
        const auto& b = out.records[k];
        if (a.t != b.t) throw std::logic_error("coupled records disagree on sample times");
        std::vector<double> d(a.size());
        double sup = 0.0;
        for (std::size_t s = 0; s < a.size(); ++s) {
            d[s] = (a.q[s] - b.q[s]).norm();
            sup = std::max(sup, d[s]);
        }
        out.distance.push_back(std::move(d));
        out.sup_distance.push_back(sup);
    }
    return out;
}

TrajectoryRecord exact_piecewise_quadratic(const SystemSpec& system, const FiniteSumProblem& problem,
                                           const JumpSkeleton& raw, const PhaseState& initial, double horizon,
                                           const std::vector<double>& sample_times) {
    if (!problem.is_quadratic()) throw std::invalid_argument("exact integrator needs a quadratic problem");
    if (system.second_order() && !system.constant_mass())
        throw std::invalid_argument("exact integrator needs constant mass");
    check_initial(system, problem, initial);
    const int K = problem.dimension();
    const bool second = system.second_order();
    const int n = second ? 2 * K + 1 : K + 1;

    JumpSkeleton sk;
    const JumpSkeleton* skp = nullptr;
    if (system.stochastic()) {
        sk = system_skeleton(system, raw, horizon);
        skp = &sk;
    }
    std::vector<RecordPoint> pts;
    pts.push_back({0.0, false});
    for (double t : sample_times)
        if (t >= 0.0 && t <= horizon) pts.push_back({t, true});
    if (skp)
        for (double t : skp->jump_times)
            if (t > 0.0 && t < horizon) pts.push_back({t, false});
    std::sort(pts.begin(), pts.end(), [](const RecordPoint& a, const RecordPoint& b) { return a.t < b.t; });
    std::vector<RecordPoint> merged;
    for (const auto& p : pts) {
        if (!merged.empty() && merged.back().t == p.t)
            merged.back().record = merged.back().record || p.record;
        else
            merged.push_back(p);
    }

    auto generator = [&](int idx) {
        Matrix H;
        Vector c;
        if (idx < 0) {
            H = Matrix::Zero(K, K);
            c = Vector::Zero(K);
            for (int i = 0; i < problem.count(); ++i) {
                auto [Hi, ci] = problem.affine_component(i);
                H += Hi;
                c += ci;
            }
            H /= problem.count();
            c /= problem.count();
        } else {
            std::tie(H, c) = problem.affine_component(idx);
        }
        Matrix M = Matrix::Zero(n, n);
        if (second) {
            const double m = system.mass().m0();
            M.block(0, K, K, K) = Matrix::Identity(K, K);
            M.block(K, 0, K, K) = -H / m;
            M.block(K, K, K, K) = -(system.alpha() / m) * Matrix::Identity(K, K);
            M.block(K, 2 * K, K, 1) = -c / m;
        } else {
            M.block(0, 0, K, K) = -H;
            M.block(0, K, K, 1) = -c;
        }
        return M;
    };

    Vector z(n);
    z.head(K) = initial.q;
    if (second) z.segment(K, K) = initial.p;
    z[n - 1] = 1.0;

    TrajectoryRecord rec;
    rec.meta = {{"system", system.describe()}, {"horizon", horizon}, {"integrator", {{"method", "matrix_exponential"}}}};
    auto push = [&](double t, int idx) {
        rec.t.push_back(t);
        Vector q = z.head(K);
        rec.q.push_back(q);
        if (second) {
            rec.p.push_back(z.segment(K, K));
        } else {
            Vector g = idx < 0 ? problem.gradient(q) : problem.component_gradient(idx, q);
            rec.p.push_back(-g);
        }
        rec.index.push_back(idx);
    };
    if (merged.front().record) push(0.0, active_index(system, skp, 0.0));
    for (std::size_t k = 1; k < merged.size(); ++k) {
        const double t0 = merged[k - 1].t, t1 = merged[k].t;
        const int idx = active_index(system, skp, t0);
        Matrix E = (generator(idx) * (t1 - t0)).exp();
        z = E * z;
        if (merged[k].record) push(t1, active_index(system, skp, t1));
    }
    return rec;
}

void TrajectoryRecord::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const Eigen::Index K = q.empty() ? 0 : q.front().size();
    out << std::setprecision(17) << "t";
    for (Eigen::Index k = 0; k < K; ++k) out << ",q" << k + 1;
    for (Eigen::Index k = 0; k < K; ++k) out << ",p" << k + 1;
    out << ",i\n";
    for (std::size_t s = 0; s < t.size(); ++s) {
        out << t[s];
        for (Eigen::Index k = 0; k < K; ++k) out << "," << q[s][k];
        for (Eigen::Index k = 0; k < K; ++k) out << "," << p[s][k];
        out << "," << index[s] + 1 << "\n";
    }
}

void TrajectoryRecord::write_sidecar(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    json j = meta;
    j["samples"] = t.size();
    out << j.dump(2) << "\n";
}

TrajectoryRecord TrajectoryRecord::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);
    const auto cols = std::count(line.begin(), line.end(), ',') + 1;
    const Eigen::Index K = (cols - 2) / 2;
    TrajectoryRecord rec;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        rec.t.push_back(v[0]);
        rec.q.push_back(Eigen::Map<Vector>(v.data() + 1, K));
        rec.p.push_back(Eigen::Map<Vector>(v.data() + 1 + K, K));
        rec.index.push_back(static_cast<int>(v[1 + 2 * K]) - 1);
    }
    return rec;
}

} // namespace sgmp
