#include "sgmp/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace sgmp {

std::pair<Vector, Vector> semi_implicit_step(const Vector& q, const Vector& p, const Vector& g, double m, double h,
                                             double alpha) {
    const double c = m / h;
    Vector p_next = (c * p - g) / (c + alpha);
    Vector q_next = q + h * p_next;
    return {std::move(q_next), std::move(p_next)};
}

std::pair<Vector, Vector> classical_momentum_step(const Vector& theta, const Vector& v, const Vector& g, double rho,
                                                  double eta) {
    Vector theta_next = theta + v;
    Vector v_next = rho * v - eta * g;
    return {std::move(theta_next), std::move(v_next)};
}

namespace {

Vector batch_mean(const FiniteSumProblem& problem, const Vector& q, const std::vector<int>& idx, bool paper_scaling) {
    Vector g = Vector::Zero(problem.dimension());
    for (int i : idx) g += problem.component_gradient(i, q);
    g /= static_cast<double>(idx.size());
    if (paper_scaling) g /= static_cast<double>(problem.count());
    return g;
}

} // namespace

Vector minibatch_gradient(const FiniteSumProblem& problem, const Vector& q, int ell, Rng& rng, bool paper_scaling,
                          std::vector<int>* drawn) {
    const int N = problem.count();
    if (ell < 1 || ell > N) throw std::invalid_argument("batch size must lie in [1, N]");
    std::vector<int> all(N), idx;
    std::iota(all.begin(), all.end(), 0);
    idx.reserve(ell);
    std::sample(all.begin(), all.end(), std::back_inserter(idx), ell, rng);
    if (drawn) *drawn = idx;
    return batch_mean(problem, q, idx, paper_scaling);
}

double heuristic_stepsize(double alpha, double L) {
    if (!(alpha > 0.0) || !(L > 0.0)) throw std::invalid_argument("alpha and L must be positive");
    return alpha / L;
}

std::string method_name(Method m) {
    switch (m) {
    case Method::SemiImplicitSGMP: return "semi_implicit_sgmp";
    case Method::ClassicalMomentum: return "classical_momentum";
    case Method::SGD: return "sgd";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "semi_implicit_sgmp" || name == "sgmp") return Method::SemiImplicitSGMP;
    if (name == "classical_momentum") return Method::ClassicalMomentum;
    if (name == "sgd") return Method::SGD;
    throw std::invalid_argument("unknown method: " + name);
}

json OptimizerConfig::describe() const {
    json j = {{"method", method_name(method)}, {"step", step.describe()}, {"batch", batch},
              {"paper_scaling", paper_scaling}, {"epoch_mode", epoch_mode}};
    if (method == Method::SemiImplicitSGMP) {
        j["alpha"] = alpha;
        j["mass"] = mass.describe();
    }
    if (method == Method::ClassicalMomentum) {
        j["rho"] = rho;
        j["eta"] = eta;
    }
    return j;
}

void IterateRecord::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << std::setprecision(17) << "n,objective,dist_to_opt,p_norm\n";
    for (std::size_t n = 0; n < objective.size(); ++n) {
        out << n << "," << objective[n] << ",";
        if (!distance.empty()) out << distance[n];
        out << "," << p_norm[n] << "\n";
    }
}

IterateRecord run_optimizer(const OptimizerConfig& config, const FiniteSumProblem& problem, const Vector& q0,
                            long iterations, Rng& rng) {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    const int N = problem.count();
    if (config.batch < 1 || config.batch > N) throw std::invalid_argument("batch size must lie in [1, N]");
    const auto& theta = problem.minimizer();

    IterateRecord rec;
    Vector q = q0;
    Vector p = Vector::Zero(q0.size());
    auto record = [&] {
        rec.objective.push_back(problem.value(q));
        if (theta) rec.distance.push_back((q - *theta).norm());
        rec.p_norm.push_back(p.norm());
        if (config.keep_iterates) {
            rec.q.push_back(q);
            rec.p.push_back(p);
        }
    };
    rec.objective.reserve(iterations + 1);
    rec.p_norm.reserve(iterations + 1);
    if (theta) rec.distance.reserve(iterations + 1);
    record();

    std::vector<int> perm(N), batch;
    std::iota(perm.begin(), perm.end(), 0);
    int cursor = N;
    const bool full = config.batch == N;

    double t = 0.0;  // elapsed time at the start of step n
    for (long n = 0; n < iterations; ++n) {
        const double h = config.step.step(n + 1);
        Vector g;
        if (full) {
            g = problem.gradient(q);
            if (config.paper_scaling) g /= static_cast<double>(N);
            if (config.keep_batches) {
                batch.assign(perm.begin(), perm.end());
                std::sort(batch.begin(), batch.end());
            }
        } else if (config.epoch_mode) {
            if (cursor + config.batch > N) {
                std::shuffle(perm.begin(), perm.end(), rng);
                cursor = 0;
            }
            batch.assign(perm.begin() + cursor, perm.begin() + cursor + config.batch);
            cursor += config.batch;
            g = batch_mean(problem, q, batch, config.paper_scaling);
        } else {
            g = minibatch_gradient(problem, q, config.batch, rng, config.paper_scaling, &batch);
        }
        if (config.keep_batches) rec.batches.push_back(batch);

        switch (config.method) {
        case Method::SemiImplicitSGMP: {
            const double m = config.mass.discrete_mass_at(n, t);
            std::tie(q, p) = semi_implicit_step(q, p, g, m, h, config.alpha);
            break;
        }
        case Method::ClassicalMomentum:
            std::tie(q, p) = classical_momentum_step(q, p, g, config.rho, config.eta);
            break;
        case Method::SGD:
            p = -g;
            q = q - h * g;
            break;
        }
        t += h;
        if (!q.allFinite() || !p.allFinite())
            throw NonFiniteIterate(n + 1, "non-finite iterate at iteration " + std::to_string(n + 1));
        record();
    }
    rec.q_final = q;
    rec.p_final = p;
    return rec;
}

} // namespace sgmp
