#pragma once

#include "sgmp/problems.hpp"
#include "sgmp/schedules.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgmp {

// p+ = (m/h p - g) / (m/h + alpha), q+ = q + h p+.
std::pair<Vector, Vector> semi_implicit_step(const Vector& q, const Vector& p, const Vector& g, double m, double h,
                                             double alpha);

// theta_n = theta_{n-1} + v_{n-1}, v_n = rho v_{n-1} - eta g(theta_{n-1}).
std::pair<Vector, Vector> classical_momentum_step(const Vector& theta, const Vector& v, const Vector& g, double rho,
                                                  double eta);

// Mean of ell component gradients drawn without replacement; extra 1/N factor when paper_scaling.
Vector minibatch_gradient(const FiniteSumProblem& problem, const Vector& q, int ell, Rng& rng, bool paper_scaling,
                          std::vector<int>* drawn = nullptr);

double heuristic_stepsize(double alpha, double L);

enum class Method { SemiImplicitSGMP, ClassicalMomentum, SGD };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct OptimizerConfig {
    Method method = Method::SemiImplicitSGMP;
    StepSchedule step = StepSchedule::constant(0.1);
    double alpha = 1.0;
    MassSchedule mass = MassSchedule::constant(1.0);
    int batch = 1;
    double rho = 0.9;
    double eta = 0.01;
    bool paper_scaling = false;
    // Draw batches as consecutive slices of a per-epoch permutation.
    bool epoch_mode = false;
    bool keep_iterates = false;
    bool keep_batches = false;

    json describe() const;
};

struct IterateRecord {
    // Entries 0..iterations; entry 0 is the initial point.
    std::vector<double> objective;
    std::vector<double> distance;  // empty when theta_star unknown
    std::vector<double> p_norm;
    std::vector<Vector> q;
    std::vector<Vector> p;
    std::vector<std::vector<int>> batches;
    Vector q_final;
    Vector p_final;

    void write_csv(const std::string& path) const;
};

class NonFiniteIterate : public std::runtime_error {
public:
    NonFiniteIterate(long iteration, const std::string& what) : std::runtime_error(what), iteration(iteration) {}
    long iteration;
};

IterateRecord run_optimizer(const OptimizerConfig& config, const FiniteSumProblem& problem, const Vector& q0,
                            long iterations, Rng& rng);

} // namespace sgmp
