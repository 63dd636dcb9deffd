#include <doctest.h>

#include "atlasgp/gp_core.hpp"
#include "atlasgp/rng.hpp"

#include <cmath>
#include <numbers>

using namespace atlasgp;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = nd(rng);
    return m;
}

double naive_lml(const Matrix& K, const Vector& y, double noise)
{
    Matrix A = K + noise * Matrix::Identity(K.rows(), K.cols());
    Matrix inv = A.inverse();
    double det = A.determinant();
    return -0.5 * y.dot(inv * y) - 0.5 * std::log(det) - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

} // namespace

TEST_CASE("rbf_matrix closed forms")
{
    Matrix X(2, 1);
    X << 0.0, 1.0;
    Matrix K = rbf_matrix(X, X, {1.0, 1.0, 0.0});
    CHECK(K(0, 0) == 1.0);
    CHECK(K(1, 1) == 1.0);
    CHECK(K(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(K(1, 0) == K(0, 1));

    Matrix Z = random_matrix(5, 3, 1);
    Matrix K2 = rbf_matrix(Z, Z, {2.5, 0.7, 0.0});
    for (int i = 0; i < 5; ++i)
        CHECK(K2(i, i) == 2.5);

    Matrix A(1, 2), B(1, 2);
    A << 0.0, 0.0;
    B << 1.0, 1.0;
    CHECK(rbf_matrix(A, B, {1.0, 0.5, 0.0})(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("rbf_matrix rejects mismatched columns and bad params")
{
    CHECK_THROWS_AS(rbf_matrix(Matrix::Zero(2, 2), Matrix::Zero(2, 3), {}), ShapeError);
    CHECK_THROWS_AS(rbf_matrix(Matrix::Zero(2, 2), Matrix::Zero(2, 2), {0.0, 1.0, 0.0}), PreconditionError);
    CHECK_THROWS_AS(rbf_matrix(Matrix::Zero(2, 2), Matrix::Zero(2, 2), {1.0, -1.0, 0.0}), PreconditionError);
}

TEST_CASE("rbf_matrix is symmetric and positive semidefinite")
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        Matrix X = random_matrix(30, 2, 100 + s);
        RbfParams p{0.5 + static_cast<double>(s), 0.1 + 0.3 * static_cast<double>(s), 0.0};
        Matrix K = rbf_matrix(X, X, p);
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(min_eigenvalue(K) >= -1e-10 * p.gamma);
    }
}

TEST_CASE("log marginal likelihood examples")
{
    Vector y0(1);
    y0 << 0.0;
    Matrix K1 = Matrix::Ones(1, 1);
    CHECK(log_marginal_likelihood(K1, y0, 0.0) == doctest::Approx(-0.91893853320467274).epsilon(1e-14));
    Vector y1(1);
    y1 << 1.0;
    CHECK(log_marginal_likelihood(K1, y1, 0.0) == doctest::Approx(-1.4189385332046727).epsilon(1e-14));
    Vector y2 = Vector::Ones(2);
    Matrix I2 = Matrix::Identity(2, 2);
    CHECK(std::abs(log_marginal_likelihood(I2, y2, 1.0) - naive_lml(I2, y2, 1.0)) < 1e-12);
}

TEST_CASE("log marginal likelihood equals the dense inverse formula")
{
    for (int n : {1, 2, 5, 17, 33, 50}) {
        Matrix X = random_matrix(n, 2, static_cast<std::uint64_t>(n));
        Matrix K = rbf_matrix(X, X, {1.3, 0.8, 0.0});
        Vector y = random_matrix(n, 1, 7u + static_cast<std::uint64_t>(n));
        double a = log_marginal_likelihood(K, y, 0.1);
        double b = naive_lml(K, y, 0.1);
        CHECK(std::abs(a - b) <= 1e-10 * std::abs(b));
    }
}

TEST_CASE("factorize escalates jitter and reports failure")
{
    Matrix A = Matrix::Ones(3, 3);
    Factor f = factorize(A);
    CHECK(f.jitter > 0.0);
    CHECK(f.jitter <= 1e-4);
    Matrix B = -Matrix::Identity(2, 2);
    try {
        factorize(B);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(e.jitter() > 0.0);
    }
}

TEST_CASE("gp_predict examples")
{
    Matrix X(3, 1);
    X << 0.0, 0.4, 1.1;
    Vector y(3);
    y << 0.3, -1.0, 0.8;
    RbfParams p{1.0, 2.0, 0.0};
    Matrix K = rbf_matrix(X, X, p);

    Prediction at_train = gp_predict(K, K.row(1), K.block(1, 1, 1, 1), y, 0.0);
    CHECK(at_train.mean(0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(at_train.cov(0, 0) <= 1e-10);

    Matrix Kss = Matrix::Identity(2, 2) * 1.5;
    Prediction zero = gp_predict(K, Matrix::Zero(2, 3), Kss, y, 0.1);
    CHECK(zero.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((zero.cov - Kss).cwiseAbs().maxCoeff() == 0.0);

    Matrix Xs(2, 1);
    Xs << 0.2, 2.0;
    Matrix Ksf = rbf_matrix(Xs, X, p);
    Matrix Kss2 = rbf_matrix(Xs, Xs, p);
    Prediction pr = gp_predict(K, Ksf, Kss2, y, 0.05);
    Matrix inv = (K + 0.05 * Matrix::Identity(3, 3)).inverse();
    Vector mean = Ksf * inv * y;
    Matrix cov = Kss2 - Ksf * inv * Ksf.transpose();
    CHECK((pr.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pr.cov - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("posterior variance never exceeds the prior")
{
    Matrix X = random_matrix(20, 2, 3);
    Matrix Xs = random_matrix(40, 2, 4) * 2.0;
    RbfParams p{1.7, 0.6, 0.0};
    Vector y = random_matrix(20, 1, 5);
    Prediction pr = gp_predict(rbf_matrix(X, X, p), rbf_matrix(Xs, X, p), rbf_matrix(Xs, Xs, p), y, 0.01);
    for (Eigen::Index i = 0; i < pr.cov.rows(); ++i) {
        CHECK(pr.cov(i, i) <= p.gamma + 1e-10);
        CHECK(pr.cov(i, i) >= -1e-10);
    }
}

TEST_CASE("optimize examples")
{
    Bound b{0.0, 10.0, Scale::linear};
    OptimizeResult r = optimize([](const std::vector<double>& p) { return -(p[0] - 2.0) * (p[0] - 2.0); },
                                std::span<const Bound>(&b, 1));
    CHECK(std::abs(r.params[0] - 2.0) < 1e-3);

    Bound lb{1e-2, 1e2, Scale::log};
    OptimizeResult c = optimize([](const std::vector<double>&) { return 1.0; }, std::span<const Bound>(&lb, 1));
    CHECK(c.params[0] == doctest::Approx(1e-2));

    std::vector<Bound> bad{{1.0, 2.0, Scale::log}};
    CHECK_THROWS_AS(
        optimize([](const std::vector<double>&) { return std::nan(""); }, bad), OptimizationError);
}

TEST_CASE("optimize stays inside the box and is deterministic")
{
    std::vector<Bound> bounds{{1e-3, 1e1, Scale::log}, {-2.0, 3.0, Scale::linear}};
    auto f = [](const std::vector<double>& p) { return p[0] * 10.0 - (p[1] + 5.0) * (p[1] + 5.0); };
    OptimizeResult a = optimize(f, bounds);
    OptimizeResult b = optimize(f, bounds);
    CHECK(a.params == b.params);
    CHECK(a.params[0] <= 1e1);
    CHECK(a.params[0] >= 1e-3);
    CHECK(a.params[1] >= -2.0);
    CHECK(a.params[1] == doctest::Approx(-2.0));
    OptimizeOptions serial_opts;
    serial_opts.parallel = false;
    CHECK(optimize(f, bounds, serial_opts).params == a.params);
}

TEST_CASE("length-scale recovery from simulated data")
{
    const int n = 80;
    Matrix X(n, 1);
    for (int i = 0; i < n; ++i)
        X(i, 0) = 10.0 * i / (n - 1);
    const double rho_true = 0.5;
    Matrix K = rbf_matrix(X, X, {1.0, rho_true, 0.0});
    K.diagonal().array() += 1e-4;
    Eigen::LLT<Matrix> llt(K);
    Vector z = random_matrix(n, 1, 11);
    Vector y = llt.matrixL() * z;
    std::vector<Bound> bounds{{1e-3, 1e2, Scale::log}};
    OptimizeResult r = optimize(
        [&](const std::vector<double>& p) { return log_marginal_likelihood(rbf_matrix(X, X, {1.0, p[0], 0.0}), y, 1e-4); },
        bounds);
    double ratio = std::sqrt(r.params[0] / rho_true);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
}

TEST_CASE("psd_project clips negative eigenvalues")
{
    Matrix A(2, 2);
    A << 1.0, 2.0, 2.0, 1.0;
    CHECK(min_eigenvalue(A) == doctest::Approx(-1.0));
    Matrix P = psd_project(A);
    CHECK(min_eigenvalue(P) >= -1e-12);
    CHECK(P(0, 0) == doctest::Approx(1.5));
    CHECK(P(0, 1) == doctest::Approx(1.5));
}
