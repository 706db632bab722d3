#pragma once

#include "sgmp/schedules.hpp"
#include "sgmp/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sgmp {

struct IndexProcessParams {
    int N = 1;
    double gamma = 1.0;
};

// Event times of the index process and the index held on each interval.
// indices[0] holds on [0, jump_times[0]), indices[k] on [jump_times[k-1], jump_times[k]).
// Indices are 0-based here; CSV files use 1..N.
struct JumpSkeleton {
    std::vector<double> jump_times;
    std::vector<int> indices;
    double horizon = 0.0;

    std::size_t jumps() const { return jump_times.size(); }
    // Interval containing t (right-continuous at jump times).
    std::size_t interval_at(double t) const;
    int index_at(double t) const { return indices[interval_at(t)]; }
};

// Uniformised simulation: Poisson(gamma N) clock, uniform redraw at each event
// (self-transitions allowed), uniform initial index.
JumpSkeleton simulate_skeleton(const IndexProcessParams& params, double T, Rng& rng);

// P(i(t) = j | i(0) = k) for the generator Gamma_N - N gamma I.
double transition_probability(const IndexProcessParams& params, int k, int j, double t);

class TimeChange {
public:
    enum class Kind { Identity, Linear, Quadratic, Numeric };

    static TimeChange identity();
    // beta(t) = t / nu, so i(beta(t)) = i(t / nu)
    static TimeChange linear(double nu);
    // beta(t) = t^2, mu(t) = 2t
    static TimeChange quadratic();
    // beta(t) = int_0^t mu; inverse by bisection
    static TimeChange numeric(std::function<double(double)> mu, std::string label = "numeric");

    Kind kind() const { return kind_; }
    double nu() const { return nu_; }
    double beta(double t) const;
    double mu(double t) const;
    double beta_inv(double s) const;

    json describe() const;

private:
    Kind kind_ = Kind::Identity;
    double nu_ = 1.0;
    std::function<double(double)> mu_fn_;
    std::string label_;
};

// Jump times tau -> beta^{-1}(tau); same index sequence.
JumpSkeleton rescale_skeleton(const JumpSkeleton& skeleton, const TimeChange& tc);
// Jump times tau -> beta(tau).
JumpSkeleton unrescale_skeleton(const JumpSkeleton& skeleton, const TimeChange& tc);

struct Assumption4Alphas {
    double a1 = 1.0, a2 = 1.0, a3 = 1.0;
};

// Indicator of kappa/(2 mu(tau^b_{n+1})) >= a1/sqrt(n) and m(tau^b_n) <= a2 exp(-a3 sqrt(n)).
// Entry n-1 corresponds to event n, for n = 1 .. jumps-1. Uses the raw (un-rescaled) skeleton.
std::vector<bool> assumption4_monitor(const JumpSkeleton& raw, const MassSchedule& mass, const TimeChange& tc,
                                      double kappa, const Assumption4Alphas& alphas);

// Constants for which m(t) = m0 e^{-lambda t} with beta(t) = t^2 is claimed to satisfy the event condition.
Assumption4Alphas quadratic_clock_alphas(double kappa, double m0, double lambda, const IndexProcessParams& params);

void write_skeleton_csv(const JumpSkeleton& skeleton, const std::string& path);
JumpSkeleton read_skeleton_csv(const std::string& path);

} // namespace sgmp
