#include <doctest.h>

#include "fixtures.hpp"

#include "atlasgp/baselines.hpp"

#include <numeric>

using namespace atlasgp;

namespace {

IdList iota_ids(int n, int first = 0)
{
    IdList ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), first);
    return ids;
}

IdList shuffled_ids(int n, std::uint64_t seed)
{
    IdList ids = iota_ids(n);
    Rng rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    return ids;
}

} // namespace

TEST_CASE("Euclidean GP matches a dense inverse on 1-D data")
{
    Matrix X(6, 1), Xs(3, 1);
    X << -1.0, -0.4, 0.1, 0.3, 0.9, 1.4;
    Xs << -0.7, 0.2, 2.0;
    Vector y(6);
    y << 0.2, -0.5, 0.7, 0.9, -0.1, 0.4;
    RbfParams p{1.4, 2.5, 0.03};
    EuclideanGp gp = make_euclidean_gp(X, y, p);
    auto pred = predict_euclidean_gp(gp, Xs);

    Matrix K(6, 6), Ks(3, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            K(i, j) = p.gamma * std::exp(-p.rho * std::pow(X(i, 0) - X(j, 0), 2));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 6; ++j)
            Ks(i, j) = p.gamma * std::exp(-p.rho * std::pow(Xs(i, 0) - X(j, 0), 2));
    Matrix C = K + p.noise_var * Matrix::Identity(6, 6);
    Matrix Ci = C.inverse();
    Vector mean = Ks * Ci * y;
    Vector var = (p.gamma * Vector::Ones(3)).array() - (Ks * Ci * Ks.transpose()).diagonal().array();
    CHECK((pred.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pred.var - var).cwiseAbs().maxCoeff() < 1e-10);
    double ll = -0.5 * y.dot(Ci * y) - 0.5 * std::log(C.determinant()) - 3.0 * std::log(2.0 * std::numbers::pi);
    CHECK(gp.log_lik == doctest::Approx(ll).epsilon(1e-10));
}

TEST_CASE("Euclidean GP recovers a single noiseless observation")
{
    Matrix X(1, 2);
    X << 0.3, -0.2;
    Vector y(1);
    y << 1.75;
    EuclideanGp gp = make_euclidean_gp(X, y, {2.0, 1.0, 1e-12});
    CHECK(predict_euclidean_gp(gp, X).mean(0) == doctest::Approx(1.75).epsilon(1e-10));
    CHECK_THROWS_AS(make_euclidean_gp(X, Vector::Ones(2), {}), ShapeError);
}

TEST_CASE("Euclidean GP errors are near nominal on GP-sampled data")
{
    const int n = 80;
    Matrix X(n, 1);
    for (int i = 0; i < n; ++i)
        X(i, 0) = static_cast<double>(i) / (n - 1);
    RbfParams truth{1.0, 30.0, 0.0};
    Matrix K = rbf_matrix(X, X, truth);
    K.diagonal().array() += 1e-8;
    Vector z = fixtures::gaussian_matrix(n, 1, 21).col(0);
    Vector f = K.llt().matrixL() * z;
    const double noise_sd = 0.05;
    Vector y = f + noise_sd * fixtures::gaussian_matrix(n, 1, 22).col(0);

    IdList order = shuffled_ids(n, 23);
    IdList train(order.begin(), order.begin() + 40), test(order.begin() + 40, order.end());
    Vector yt(40), ft(40);
    for (int k = 0; k < 40; ++k) {
        yt(k) = y(train[static_cast<std::size_t>(k)]);
        ft(k) = f(test[static_cast<std::size_t>(k)]);
    }
    Matrix Xtr(40, 1), Xte(40, 1);
    for (int k = 0; k < 40; ++k) {
        Xtr(k, 0) = X(train[static_cast<std::size_t>(k)], 0);
        Xte(k, 0) = X(test[static_cast<std::size_t>(k)], 0);
    }
    EuclideanGp gp = fit_euclidean_gp(Xtr, yt);
    auto pred = predict_euclidean_gp(gp, Xte);
    double err = rmse(pred.mean, ft);
    double nominal = std::sqrt(pred.var.mean());
    CHECK(err < 0.2 * std::sqrt((f.array() - f.mean()).square().mean()));
    CHECK(err / nominal > 0.25);
    CHECK(err / nominal < 4.0);
}

TEST_CASE("Euclidean GP ignores the U-shape gap")
{
    UShapeFixture fx = ushape_fixture();
    const int n = fx.cloud.n();
    double total = 0.0;
    const int reps = 5;
    for (int r = 0; r < reps; ++r) {
        Vector noisy = add_noise(fx.f, 30.0, 100 + static_cast<std::uint64_t>(r));
        IdList ids = shuffled_ids(n, 200 + static_cast<std::uint64_t>(r));
        ids.resize(30);
        Vector y(30);
        for (int k = 0; k < 30; ++k)
            y(k) = noisy(ids[static_cast<std::size_t>(k)]);
        SearchConfig sc;
        sc.budget = 800;
        EuclideanGp gp = fit_euclidean_gp(fx.cloud.rows(ids), y, sc);
        total += rmse(predict_euclidean_gp(gp, fx.cloud.points).mean, fx.f);
    }
    CHECK(total / reps >= 1.0);
}

TEST_CASE("GL spectrum is sorted, nonnegative and yields a PSD kernel")
{
    TorusFixture fx = torus_fixture();
    GlSpectrum s = gl_spectrum(fx.cloud.points, {});
    REQUIRE(s.eigenvalues.size() == 625);
    CHECK(s.bandwidth > 0.0);
    CHECK(s.eigenvalues(0) > -1e-10);
    CHECK(std::abs(s.eigenvalues(0)) < 1e-10);
    for (Eigen::Index k = 1; k < s.eigenvalues.size(); ++k)
        CHECK(s.eigenvalues(k) >= s.eigenvalues(k - 1));
    CHECK(s.eigenvalues.maxCoeff() <= 2.0 + 1e-10);

    for (double t : {0.1, 3.0, 100.0}) {
        Matrix K = gl_kernel(s, t);
        K /= K.diagonal().mean();
        CHECK(min_eigenvalue(K) >= -1e-10);
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
    Matrix K20 = gl_kernel(s, 1.0, 20);
    CHECK(min_eigenvalue(K20 / K20.diagonal().mean()) >= -1e-10);
}

TEST_CASE("GL kernel on a complete regular graph tends to a scaled identity")
{
    const int n = 6;
    Matrix simplex = Matrix::Identity(n, n);
    GlConfig c;
    c.k_neighbors = n - 1;
    c.bandwidth = 1.0;
    GlSpectrum s = gl_spectrum(simplex, c);
    Matrix K = gl_kernel(s, 1e-9);
    Matrix expected = s.degree.cwiseInverse().asDiagonal();
    CHECK((K - expected).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((K / K(0, 0) - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-8);

    SUBCASE("the GP shrinks like ridge regression")
    {
        GlConfig g = c;
        g.t = 1e-9;
        Vector y(3);
        y << 1.0, -2.0, 0.5;
        GlGp gp = fit_gl_gp(PointCloud(simplex), {0, 2, 4}, y, g);
        auto pred = predict_gl_gp(gp, {0, 2, 4, 1});
        double shrink = gp.rescale / (gp.rescale + gp.noise_var);
        for (int k = 0; k < 3; ++k)
            CHECK(pred.mean(k) == doctest::Approx(shrink * y(k)).epsilon(1e-6));
        CHECK(std::abs(pred.mean(3)) < 1e-6);
    }
}

TEST_CASE("GL rejects disconnected graphs and bad configurations")
{
    Matrix X(8, 1);
    X << 0.0, 0.1, 0.2, 0.3, 50.0, 50.1, 50.2, 50.3;
    GlConfig c;
    c.k_neighbors = 2;
    CHECK_THROWS_AS(gl_spectrum(X, c), BaselineError);
    c.k_neighbors = 0;
    CHECK_THROWS_AS(gl_spectrum(X, c), PreconditionError);
    c.k_neighbors = 2;
    c.n_eigs = 9;
    CHECK_THROWS_AS(gl_spectrum(X, c), PreconditionError);
    c.n_eigs = 0;
    c.bandwidth = -1.0;
    CHECK_THROWS_AS(gl_spectrum(X, c), PreconditionError);
}

TEST_CASE("GL heat profile integrates to about one on the torus")
{
    TorusFixture fx = torus_fixture();
    GlSpectrum s = gl_spectrum(fx.cloud.points, {});
    Vector area(625);
    const double cell = std::pow(2.0 * std::numbers::pi / 25.0, 2);
    for (int i = 0; i < 625; ++i)
        area(i) = cell * fx.r * (fx.R + fx.r * std::cos(fx.angles(i, 0)));
    Vector prof = gl_heat_profile(s, 0, iota_ids(625), 1.0, area);
    CHECK(prof.minCoeff() > -1e-8);
    CHECK(prof.dot(area) == doctest::Approx(1.0).epsilon(0.05));
    CHECK_THROWS_AS(gl_heat_profile(s, 0, {1}, 1.0, Vector::Ones(3)), ShapeError);
}
