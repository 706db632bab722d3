#pragma once

#include "sgmp/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sgmp {

// Finite-sum objective Phi_bar = (1/N) sum_i Phi_i. Immutable once built.
class FiniteSumProblem {
public:
    virtual ~FiniteSumProblem() = default;

    virtual int dimension() const = 0;
    virtual int count() const = 0;
    virtual std::string kind() const = 0;

    virtual double component_value(int i, const Vector& x) const = 0;
    virtual Vector component_gradient(int i, const Vector& x) const = 0;

    virtual double value(const Vector& x) const;
    virtual Vector gradient(const Vector& x) const;

    double lipschitz() const { return lipschitz_; }
    double convexity() const { return kappa_; }
    const std::optional<Vector>& minimizer() const { return theta_star_; }

    // grad_i(x) = H x + c when every component is quadratic.
    virtual bool is_quadratic() const { return false; }
    virtual std::pair<Matrix, Vector> affine_component(int i) const;

    // Minimiser of Phi_i alone, when it exists and is known.
    virtual std::optional<Vector> component_minimizer(int i) const;

    virtual json describe() const = 0;

protected:
    double lipschitz_ = 0.0;
    double kappa_ = 0.0;
    std::optional<Vector> theta_star_;
};

using ProblemPtr = std::shared_ptr<const FiniteSumProblem>;

// Phi(x) = x^2 + 1 for x <= 0, 2x^2 - 2x + 1 for x > 0.
class ReluProblem final : public FiniteSumProblem {
public:
    ReluProblem();
    int dimension() const override { return 1; }
    int count() const override { return 1; }
    std::string kind() const override { return "relu"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    std::optional<Vector> component_minimizer(int i) const override;
    json describe() const override;
};

// Phi_i(x) = (N/2) x^T A_i x + N b_i^T x.
class QuadraticProblem final : public FiniteSumProblem {
public:
    QuadraticProblem(std::vector<Matrix> A, std::vector<Vector> b);

    int dimension() const override { return static_cast<int>(b_.front().size()); }
    int count() const override { return static_cast<int>(b_.size()); }
    std::string kind() const override { return "quadratic"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    double value(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    bool is_quadratic() const override { return true; }
    std::pair<Matrix, Vector> affine_component(int i) const override;
    std::optional<Vector> component_minimizer(int i) const override;
    json describe() const override;

    const Matrix& A(int i) const { return A_[i]; }
    const Vector& b(int i) const { return b_[i]; }
    // Hessian of Phi_bar, equal to sum_i A_i.
    const Matrix& mean_hessian() const { return A_sum_; }

    json generator;  // filled by make_quadratic_problem for reproducible echo

private:
    std::vector<Matrix> A_;
    std::vector<Vector> b_;
    Matrix A_sum_;
    Vector b_sum_;
};

// Phi_i(x) = -(N/2) x^T A_i x + N b_i^T x + (1/4) sum_j x_j^4.
class PolynomialProblem final : public FiniteSumProblem {
public:
    PolynomialProblem(std::vector<Matrix> A, std::vector<Vector> b, double box_radius = 10.0);

    int dimension() const override { return static_cast<int>(b_.front().size()); }
    int count() const override { return static_cast<int>(b_.size()); }
    std::string kind() const override { return "polynomial"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    double value(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    json describe() const override;

    Matrix hessian(const Vector& x) const;
    double box_radius() const { return box_radius_; }

    json generator;

private:
    std::vector<Matrix> A_;
    std::vector<Vector> b_;
    Matrix A_sum_;
    Vector b_sum_;
    double box_radius_;
};

// 1D convex, not strongly convex: x^2 on [0,1], 2x-1 on (1,2], x^2/2+1 beyond,
// extended evenly.
class PiecewiseConvexProblem final : public FiniteSumProblem {
public:
    explicit PiecewiseConvexProblem(double alpha);
    int dimension() const override { return 1; }
    int count() const override { return 1; }
    std::string kind() const override { return "piecewise_convex"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    std::optional<Vector> component_minimizer(int i) const override;
    json describe() const override;

    double alpha() const { return alpha_; }
    // Largest lambda in the admissible interval stated for this example.
    double admissible_lambda() const { return 2.0 / (8.0 + alpha_ * alpha_); }

    static double phi(double x);
    static double dphi(double x);

private:
    double alpha_;
};

// Phi_i(w) = log(1 + exp(-y_i a_i^T w)) + (reg/2)|w|^2 on synthetic data.
class LogisticProblem final : public FiniteSumProblem {
public:
    LogisticProblem(int K, int N, std::uint64_t seed, double reg = 0.1);
    int dimension() const override { return static_cast<int>(features_.cols()); }
    int count() const override { return static_cast<int>(features_.rows()); }
    std::string kind() const override { return "logistic"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    json describe() const override;

    Matrix hessian(const Vector& x) const;

private:
    Matrix features_;
    Vector labels_;
    double reg_;
    std::uint64_t seed_;
};

// Phi'_i = rho * Phi_i.
class ScaledProblem final : public FiniteSumProblem {
public:
    ScaledProblem(ProblemPtr base, double rho);
    int dimension() const override { return base_->dimension(); }
    int count() const override { return base_->count(); }
    std::string kind() const override { return "scaled"; }
    double component_value(int i, const Vector& x) const override;
    Vector component_gradient(int i, const Vector& x) const override;
    double value(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    bool is_quadratic() const override { return base_->is_quadratic(); }
    std::pair<Matrix, Vector> affine_component(int i) const override;
    std::optional<Vector> component_minimizer(int i) const override;
    json describe() const override;

private:
    ProblemPtr base_;
    double rho_;
};

ProblemPtr make_relu_problem();
std::shared_ptr<const QuadraticProblem> make_quadratic_problem(int K, int N, double eig_lo, double eig_hi,
                                                               double b_stddev, std::uint64_t seed);
std::shared_ptr<const PolynomialProblem> make_polynomial_problem(int K, int N, double eig_lo, double eig_hi,
                                                                 double b_stddev, std::uint64_t seed);
std::shared_ptr<const PiecewiseConvexProblem> make_piecewise_convex_problem(double alpha);
std::shared_ptr<const LogisticProblem> make_logistic_problem(int K, int N, std::uint64_t seed, double reg = 0.1);

// Single quadratic component with explicit Hessian: Phi(x) = 1/2 x^T H x + c^T x.
std::shared_ptr<const QuadraticProblem> make_single_quadratic(const Matrix& H, const Vector& c);

// Random symmetric positive definite matrix with eigenvalues uniform in [lo, hi].
Matrix random_spd(int K, double lo, double hi, Rng& rng);

ProblemPtr problem_from_json(const json& desc);

} // namespace sgmp
