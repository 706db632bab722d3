#include "sgmp/index_process.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sgmp {

std::size_t JumpSkeleton::interval_at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return static_cast<std::size_t>(it - jump_times.begin());
}

JumpSkeleton simulate_skeleton(const IndexProcessParams& params, double T, Rng& rng) {
    if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (params.N < 1 || !(params.gamma > 0.0)) throw std::invalid_argument("need N >= 1 and gamma > 0");
    std::exponential_distribution<double> clock(params.gamma * params.N);
    std::uniform_int_distribution<int> pick(0, params.N - 1);
    JumpSkeleton sk;
    sk.horizon = T;
    sk.indices.push_back(pick(rng));
    double t = clock(rng);
    while (t <= T) {
        sk.jump_times.push_back(t);
        sk.indices.push_back(pick(rng));
        t += clock(rng);
    }
    return sk;
}

double transition_probability(const IndexProcessParams& params, int k, int j, double t) {
    const double inv = 1.0 / params.N;
    return inv + ((k == j ? 1.0 : 0.0) - inv) * std::exp(-params.gamma * params.N * t);
}

TimeChange TimeChange::identity() { return TimeChange{}; }

TimeChange TimeChange::linear(double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    TimeChange tc;
    tc.kind_ = Kind::Linear;
    tc.nu_ = nu;
    return tc;
}

TimeChange TimeChange::quadratic() {
    TimeChange tc;
    tc.kind_ = Kind::Quadratic;
    return tc;
}

TimeChange TimeChange::numeric(std::function<double(double)> mu, std::string label) {
    TimeChange tc;
    tc.kind_ = Kind::Numeric;
    tc.mu_fn_ = std::move(mu);
    tc.label_ = std::move(label);
    return tc;
}

double TimeChange::beta(double t) const {
    switch (kind_) {
    case Kind::Identity: return t;
    case Kind::Linear: return t / nu_;
    case Kind::Quadratic: return t * t;
    case Kind::Numeric:
        if (t == 0.0) return 0.0;
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(mu_fn_, 0.0, t, 15, 1e-12);
    }
    return t;
}

double TimeChange::mu(double t) const {
    switch (kind_) {
    case Kind::Identity: return 1.0;
    case Kind::Linear: return 1.0 / nu_;
    case Kind::Quadratic: return 2.0 * t;
    case Kind::Numeric: return mu_fn_(t);
    }
    return 1.0;
}

double TimeChange::beta_inv(double s) const {
    switch (kind_) {
    case Kind::Identity: return s;
    case Kind::Linear: return nu_ * s;
    case Kind::Quadratic: return std::sqrt(s);
    case Kind::Numeric: break;
    }
    if (s <= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (beta(hi) < s) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw std::domain_error("beta_inv: bracket expansion failed");
    }
    // beta' = mu > 0, so safeguarded Newton converges from inside the bracket
    auto f = [&](double t) { return std::make_pair(beta(t) - s, mu(t)); };
    std::uintmax_t iters = 100;
    return boost::math::tools::newton_raphson_iterate(f, 0.5 * (lo + hi), lo, hi, 42, iters);
}

json TimeChange::describe() const {
    switch (kind_) {
    case Kind::Identity: return {{"kind", "identity"}};
    case Kind::Linear: return {{"kind", "linear"}, {"nu", nu_}};
    case Kind::Quadratic: return {{"kind", "quadratic"}};
    case Kind::Numeric: return {{"kind", "numeric"}, {"label", label_}};
    }
    return {};
}

namespace {

JumpSkeleton map_times(const JumpSkeleton& sk, const std::function<double(double)>& f) {
    JumpSkeleton out;
    out.indices = sk.indices;
    out.horizon = f(sk.horizon);
    if (!std::isfinite(out.horizon)) throw std::domain_error("time change undefined at skeleton horizon");
    out.jump_times.reserve(sk.jump_times.size());
    for (double t : sk.jump_times) out.jump_times.push_back(f(t));
    return out;
}

} // namespace

JumpSkeleton rescale_skeleton(const JumpSkeleton& skeleton, const TimeChange& tc) {
    if (tc.kind() == TimeChange::Kind::Identity) return skeleton;
    return map_times(skeleton, [&](double s) { return tc.beta_inv(s); });
}

JumpSkeleton unrescale_skeleton(const JumpSkeleton& skeleton, const TimeChange& tc) {
    if (tc.kind() == TimeChange::Kind::Identity) return skeleton;
    return map_times(skeleton, [&](double t) { return tc.beta(t); });
}

std::vector<bool> assumption4_monitor(const JumpSkeleton& raw, const MassSchedule& mass, const TimeChange& tc,
                                      double kappa, const Assumption4Alphas& a) {
    if (!(a.a1 > 0.0 && a.a2 > 0.0 && a.a3 > 0.0)) throw std::invalid_argument("alphas must be positive");
    std::vector<bool> out;
    const std::size_t n_events = raw.jump_times.size();
    for (std::size_t n = 1; n + 1 <= n_events; ++n) {
        // jump_times[n-1] is tau_n
        double tb_n = tc.beta_inv(raw.jump_times[n - 1]);
        double tb_next = tc.beta_inv(raw.jump_times[n]);
        double sn = std::sqrt(static_cast<double>(n));
        bool first = kappa / (2.0 * tc.mu(tb_next)) >= a.a1 / sn;
        bool second = mass.mass(tb_n) <= a.a2 * std::exp(-a.a3 * sn);
        out.push_back(first && second);
    }
    return out;
}

Assumption4Alphas quadratic_clock_alphas(double kappa, double m0, double lambda, const IndexProcessParams& params) {
    const double s = std::sqrt(2.0 * params.gamma * params.N);
    return {2.0 / (kappa * s), m0, lambda / s};
}

void write_skeleton_csv(const JumpSkeleton& skeleton, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << std::setprecision(17);
    out << "# horizon=" << skeleton.horizon << "\n";
    out << "jump_time,index\n";
    out << 0.0 << "," << skeleton.indices.front() + 1 << "\n";
    for (std::size_t k = 0; k < skeleton.jump_times.size(); ++k)
        out << skeleton.jump_times[k] << "," << skeleton.indices[k + 1] + 1 << "\n";
}

JumpSkeleton read_skeleton_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    JumpSkeleton sk;
    std::string line;
    bool header = false, first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# horizon=", 0) == 0) {
            sk.horizon = std::stod(line.substr(10));
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        auto comma = line.find(',');
        double t = std::stod(line.substr(0, comma));
        int idx = std::stoi(line.substr(comma + 1)) - 1;
        if (first) {
            sk.indices.push_back(idx);
            first = false;
        } else {
            sk.jump_times.push_back(t);
            sk.indices.push_back(idx);
        }
    }
    if (sk.indices.empty()) throw std::runtime_error("empty skeleton file " + path);
    return sk;
}

} // namespace sgmp
