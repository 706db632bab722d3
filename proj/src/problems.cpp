#include "sgmp/problems.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace sgmp {

double FiniteSumProblem::value(const Vector& x) const {
    double s = 0.0;
    for (int i = 0; i < count(); ++i) s += component_value(i, x);
    return s / count();
}

Vector FiniteSumProblem::gradient(const Vector& x) const {
    Vector g = Vector::Zero(dimension());
    for (int i = 0; i < count(); ++i) g += component_gradient(i, x);
    return g / count();
}

std::pair<Matrix, Vector> FiniteSumProblem::affine_component(int) const {
    throw std::logic_error(kind() + " problem has no affine gradient representation");
}

std::optional<Vector> FiniteSumProblem::component_minimizer(int) const {
    return std::nullopt;
}

namespace {

double max_eig(const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_eig(const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

json vec_to_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vec_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) rows.push_back(vec_to_json(M.row(r).transpose()));
    return rows;
}

Matrix mat_from_json(const json& j) {
    Matrix M(j.size(), j.at(0).size());
    for (std::size_t r = 0; r < j.size(); ++r) M.row(r) = vec_from_json(j[r]).transpose();
    return M;
}

} // namespace

// -- ReLU ------------------------------------------------------------------

ReluProblem::ReluProblem() {
    lipschitz_ = 4.0;
    kappa_ = 0.0;
    theta_star_ = Vector::Constant(1, 0.5);
}

double ReluProblem::component_value(int, const Vector& x) const {
    double v = x[0];
    return v <= 0.0 ? v * v + 1.0 : 2.0 * v * v - 2.0 * v + 1.0;
}

Vector ReluProblem::component_gradient(int, const Vector& x) const {
    double v = x[0];
    return Vector::Constant(1, v <= 0.0 ? 2.0 * v : 4.0 * v - 2.0);
}

std::optional<Vector> ReluProblem::component_minimizer(int) const { return theta_star_; }

json ReluProblem::describe() const { return {{"kind", "relu"}, {"L", lipschitz_}}; }

// -- Quadratic ---------------------------------------------------------------

QuadraticProblem::QuadraticProblem(std::vector<Matrix> A, std::vector<Vector> b)
    : A_(std::move(A)), b_(std::move(b)) {
    if (A_.empty() || A_.size() != b_.size())
        throw std::invalid_argument("quadratic problem needs matching non-empty A_i and b_i");
    const int K = static_cast<int>(b_.front().size());
    const double N = static_cast<double>(A_.size());
    A_sum_ = Matrix::Zero(K, K);
    b_sum_ = Vector::Zero(K);
    double lmax = 0.0;
    for (std::size_t i = 0; i < A_.size(); ++i) {
        A_sum_ += A_[i];
        b_sum_ += b_[i];
        lmax = std::max(lmax, max_eig(A_[i]));
    }
    lipschitz_ = N * lmax;
    kappa_ = min_eig(A_sum_);
    // a singular mean Hessian is allowed (free motion tests); it just has no unique minimiser
    if (kappa_ > 0.0)
        theta_star_ = A_sum_.ldlt().solve(-b_sum_);
    else
        kappa_ = 0.0;
}

double QuadraticProblem::component_value(int i, const Vector& x) const {
    const double N = count();
    return 0.5 * N * x.dot(A_[i] * x) + N * b_[i].dot(x);
}

Vector QuadraticProblem::component_gradient(int i, const Vector& x) const {
    const double N = count();
    return N * (A_[i] * x + b_[i]);
}

double QuadraticProblem::value(const Vector& x) const {
    return 0.5 * x.dot(A_sum_ * x) + b_sum_.dot(x);
}

Vector QuadraticProblem::gradient(const Vector& x) const { return A_sum_ * x + b_sum_; }

std::pair<Matrix, Vector> QuadraticProblem::affine_component(int i) const {
    const double N = count();
    return {N * A_[i], N * b_[i]};
}

std::optional<Vector> QuadraticProblem::component_minimizer(int i) const {
    if (!(min_eig(A_[i]) > 0.0)) return std::nullopt;
    return Vector(A_[i].ldlt().solve(-b_[i]));
}

json QuadraticProblem::describe() const {
    json d = {{"kind", "quadratic"}, {"K", dimension()}, {"N", count()}, {"L", lipschitz_}, {"kappa", kappa_}};
    if (!generator.is_null()) {
        d["generator"] = generator;
    } else {
        json A = json::array(), b = json::array();
        for (int i = 0; i < count(); ++i) {
            A.push_back(mat_to_json(A_[i]));
            b.push_back(vec_to_json(b_[i]));
        }
        d["A"] = A;
        d["b"] = b;
    }
    return d;
}

Matrix random_spd(int K, double lo, double hi, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(lo, hi);
    Matrix G(K, K);
    for (int c = 0; c < K; ++c)
        for (int r = 0; r < K; ++r) G(r, c) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int c = 0; c < K; ++c)
        if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
    Vector ev(K);
    for (int k = 0; k < K; ++k) ev[k] = (lo == hi) ? lo : unif(rng);
    Matrix A = Q * ev.asDiagonal() * Q.transpose();
    return 0.5 * (A + A.transpose());
}

namespace {

void sample_components(int K, int N, double lo, double hi, double b_stddev, std::uint64_t seed,
                       std::vector<Matrix>& A, std::vector<Vector>& b) {
    if (K < 1 || N < 1) throw std::invalid_argument("K and N must be positive");
    if (!(lo > 0.0) || hi < lo) throw std::invalid_argument("eigenvalue interval must be positive");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    A.clear();
    b.clear();
    for (int i = 0; i < N; ++i) {
        A.push_back(random_spd(K, lo, hi, rng));
        Vector bi(K);
        for (int k = 0; k < K; ++k) bi[k] = b_stddev * normal(rng);
        b.push_back(bi);
    }
}

json generator_json(const char* kind, int K, int N, double lo, double hi, double b_stddev, std::uint64_t seed) {
    return {{"kind", kind}, {"K", K}, {"N", N}, {"eig", {lo, hi}}, {"b_stddev", b_stddev}, {"seed", seed}};
}

} // namespace

std::shared_ptr<const QuadraticProblem> make_quadratic_problem(int K, int N, double eig_lo, double eig_hi,
                                                               double b_stddev, std::uint64_t seed) {
    std::vector<Matrix> A;
    std::vector<Vector> b;
    sample_components(K, N, eig_lo, eig_hi, b_stddev, seed, A, b);
    auto p = std::make_shared<QuadraticProblem>(std::move(A), std::move(b));
    p->generator = generator_json("quadratic", K, N, eig_lo, eig_hi, b_stddev, seed);
    return p;
}

std::shared_ptr<const QuadraticProblem> make_single_quadratic(const Matrix& H, const Vector& c) {
    return std::make_shared<QuadraticProblem>(std::vector<Matrix>{H}, std::vector<Vector>{c});
}

// -- Polynomial ------------------------------------------------------------

PolynomialProblem::PolynomialProblem(std::vector<Matrix> A, std::vector<Vector> b, double box_radius)
    : A_(std::move(A)), b_(std::move(b)), box_radius_(box_radius) {
    if (A_.empty() || A_.size() != b_.size())
        throw std::invalid_argument("polynomial problem needs matching non-empty A_i and b_i");
    const int K = static_cast<int>(b_.front().size());
    const double N = static_cast<double>(A_.size());
    A_sum_ = Matrix::Zero(K, K);
    b_sum_ = Vector::Zero(K);
    double lmax = 0.0;
    for (std::size_t i = 0; i < A_.size(); ++i) {
        A_sum_ += A_[i];
        b_sum_ += b_[i];
        lmax = std::max(lmax, max_eig(A_[i]));
    }
    // Not globally Lipschitz; this is the constant on the box [-R, R]^K.
    lipschitz_ = N * lmax + 3.0 * box_radius_ * box_radius_;
    kappa_ = 0.0;
}

double PolynomialProblem::component_value(int i, const Vector& x) const {
    const double N = count();
    return -0.5 * N * x.dot(A_[i] * x) + N * b_[i].dot(x) + 0.25 * x.array().pow(4).sum();
}

Vector PolynomialProblem::component_gradient(int i, const Vector& x) const {
    const double N = count();
    return -N * (A_[i] * x) + N * b_[i] + Vector(x.array().cube());
}

double PolynomialProblem::value(const Vector& x) const {
    return -0.5 * x.dot(A_sum_ * x) + b_sum_.dot(x) + 0.25 * x.array().pow(4).sum();
}

Vector PolynomialProblem::gradient(const Vector& x) const {
    return -(A_sum_ * x) + b_sum_ + Vector(x.array().cube());
}

Matrix PolynomialProblem::hessian(const Vector& x) const {
    Matrix H = -A_sum_;
    H.diagonal() += Vector(3.0 * x.array().square());
    return H;
}

json PolynomialProblem::describe() const {
    json d = {{"kind", "polynomial"}, {"K", dimension()}, {"N", count()}, {"L_box", lipschitz_},
              {"box_radius", box_radius_}};
    if (!generator.is_null()) {
        d["generator"] = generator;
    } else {
        json A = json::array(), b = json::array();
        for (int i = 0; i < count(); ++i) {
            A.push_back(mat_to_json(A_[i]));
            b.push_back(vec_to_json(b_[i]));
        }
        d["A"] = A;
        d["b"] = b;
    }
    return d;
}

std::shared_ptr<const PolynomialProblem> make_polynomial_problem(int K, int N, double eig_lo, double eig_hi,
                                                                 double b_stddev, std::uint64_t seed) {
    std::vector<Matrix> A;
    std::vector<Vector> b;
    sample_components(K, N, eig_lo, eig_hi, b_stddev, seed, A, b);
    auto p = std::make_shared<PolynomialProblem>(std::move(A), std::move(b));
    p->generator = generator_json("polynomial", K, N, eig_lo, eig_hi, b_stddev, seed);
    return p;
}

// -- Piecewise convex --------------------------------------------------------

PiecewiseConvexProblem::PiecewiseConvexProblem(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    lipschitz_ = 2.0;
    kappa_ = 0.0;
    theta_star_ = Vector::Zero(1);
}

double PiecewiseConvexProblem::phi(double x) {
    double a = std::abs(x);
    if (a <= 1.0) return a * a;
    if (a <= 2.0) return 2.0 * a - 1.0;
    return 0.5 * a * a + 1.0;
}

double PiecewiseConvexProblem::dphi(double x) {
    double a = std::abs(x);
    double d = a <= 1.0 ? 2.0 * a : (a <= 2.0 ? 2.0 : a);
    return x < 0.0 ? -d : d;
}

double PiecewiseConvexProblem::component_value(int, const Vector& x) const { return phi(x[0]); }

Vector PiecewiseConvexProblem::component_gradient(int, const Vector& x) const {
    return Vector::Constant(1, dphi(x[0]));
}

std::optional<Vector> PiecewiseConvexProblem::component_minimizer(int) const { return theta_star_; }

json PiecewiseConvexProblem::describe() const {
    return {{"kind", "piecewise_convex"}, {"alpha", alpha_}, {"lambda_admissible", admissible_lambda()}};
}

std::shared_ptr<const PiecewiseConvexProblem> make_piecewise_convex_problem(double alpha) {
    return std::make_shared<PiecewiseConvexProblem>(alpha);
}

// -- Logistic ----------------------------------------------------------------

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

LogisticProblem::LogisticProblem(int K, int N, std::uint64_t seed, double reg) : reg_(reg), seed_(seed) {
    if (K < 1 || N < 1) throw std::invalid_argument("K and N must be positive");
    if (!(reg > 0.0)) throw std::invalid_argument("regulariser must be positive");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector w_true(K);
    for (int k = 0; k < K; ++k) w_true[k] = normal(rng);
    features_.resize(N, K);
    labels_.resize(N);
    double max_sq = 0.0;
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < K; ++k) features_(i, k) = normal(rng);
        double margin = features_.row(i).dot(w_true) + 0.5 * normal(rng);
        labels_[i] = margin >= 0.0 ? 1.0 : -1.0;
        max_sq = std::max(max_sq, features_.row(i).squaredNorm());
    }
    lipschitz_ = 0.25 * max_sq + reg_;
    kappa_ = reg_;

    Vector w = Vector::Zero(K);
    for (int it = 0; it < 100; ++it) {
        Vector g = gradient(w);
        if (g.norm() < 1e-14) break;
        w -= hessian(w).ldlt().solve(g);
    }
    theta_star_ = w;
}

double LogisticProblem::component_value(int i, const Vector& x) const {
    double z = labels_[i] * features_.row(i).dot(x);
    return softplus(-z) + 0.5 * reg_ * x.squaredNorm();
}

Vector LogisticProblem::component_gradient(int i, const Vector& x) const {
    double z = labels_[i] * features_.row(i).dot(x);
    return Vector(-labels_[i] * sigmoid(-z) * features_.row(i).transpose()) + reg_ * x;
}

Vector LogisticProblem::gradient(const Vector& x) const {
    Vector z = labels_.cwiseProduct(features_ * x);
    Vector w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) w[i] = -labels_[i] * sigmoid(-z[i]);
    return features_.transpose() * w / static_cast<double>(count()) + reg_ * x;
}

Matrix LogisticProblem::hessian(const Vector& x) const {
    Vector z = labels_.cwiseProduct(features_ * x);
    Vector s(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        double sg = sigmoid(z[i]);
        s[i] = sg * (1.0 - sg);
    }
    Matrix H = features_.transpose() * s.asDiagonal() * features_ / static_cast<double>(count());
    H.diagonal().array() += reg_;
    return H;
}

json LogisticProblem::describe() const {
    return {{"kind", "logistic"}, {"K", dimension()}, {"N", count()}, {"seed", seed_}, {"reg", reg_},
            {"L", lipschitz_}, {"kappa", kappa_}};
}

std::shared_ptr<const LogisticProblem> make_logistic_problem(int K, int N, std::uint64_t seed, double reg) {
    return std::make_shared<LogisticProblem>(K, N, seed, reg);
}

// -- Scaled ----------------------------------------------------------------

ScaledProblem::ScaledProblem(ProblemPtr base, double rho) : base_(std::move(base)), rho_(rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("scale must be positive");
    lipschitz_ = rho_ * base_->lipschitz();
    kappa_ = rho_ * base_->convexity();
    theta_star_ = base_->minimizer();
}

double ScaledProblem::component_value(int i, const Vector& x) const { return rho_ * base_->component_value(i, x); }
Vector ScaledProblem::component_gradient(int i, const Vector& x) const {
    return rho_ * base_->component_gradient(i, x);
}
double ScaledProblem::value(const Vector& x) const { return rho_ * base_->value(x); }
Vector ScaledProblem::gradient(const Vector& x) const { return rho_ * base_->gradient(x); }

std::pair<Matrix, Vector> ScaledProblem::affine_component(int i) const {
    auto [H, c] = base_->affine_component(i);
    return {rho_ * H, rho_ * c};
}

std::optional<Vector> ScaledProblem::component_minimizer(int i) const { return base_->component_minimizer(i); }

json ScaledProblem::describe() const { return {{"kind", "scaled"}, {"rho", rho_}, {"base", base_->describe()}}; }

// -- JSON ------------------------------------------------------------------

ProblemPtr problem_from_json(const json& desc) {
    const std::string kind = desc.at("kind").get<std::string>();
    if (kind == "relu") return make_relu_problem();
    if (kind == "piecewise_convex") return make_piecewise_convex_problem(desc.at("alpha").get<double>());
    if (kind == "logistic")
        return make_logistic_problem(desc.at("K").get<int>(), desc.at("N").get<int>(),
                                     desc.at("seed").get<std::uint64_t>(), desc.value("reg", 0.1));
    if (kind == "scaled")
        return std::make_shared<ScaledProblem>(problem_from_json(desc.at("base")), desc.at("rho").get<double>());
    if (kind == "quadratic" || kind == "polynomial") {
        if (desc.contains("generator")) return problem_from_json(desc.at("generator"));
        if (desc.contains("A")) {
            std::vector<Matrix> A;
            std::vector<Vector> b;
            for (const auto& a : desc.at("A")) A.push_back(mat_from_json(a));
            for (const auto& v : desc.at("b")) b.push_back(vec_from_json(v));
            if (kind == "quadratic") return std::make_shared<QuadraticProblem>(std::move(A), std::move(b));
            return std::make_shared<PolynomialProblem>(std::move(A), std::move(b), desc.value("box_radius", 10.0));
        }
        auto eig = desc.at("eig").get<std::vector<double>>();
        const int K = desc.at("K").get<int>();
        const int N = desc.at("N").get<int>();
        const double sd = desc.value("b_stddev", 2.0);
        const auto seed = desc.at("seed").get<std::uint64_t>();
        if (kind == "quadratic") return make_quadratic_problem(K, N, eig.at(0), eig.at(1), sd, seed);
        return make_polynomial_problem(K, N, eig.at(0), eig.at(1), sd, seed);
    }
    throw std::invalid_argument("unknown problem kind: " + kind);
}

ProblemPtr make_relu_problem() { return std::make_shared<ReluProblem>(); }

} // namespace sgmp
