#include <doctest.h>

#include "fixtures.hpp"

#include "atlasgp/agp.hpp"
#include "atlasgp/baselines.hpp"

#include <numeric>

using namespace atlasgp;

namespace {

HeatKernelGrid fixed_grid(const IdList& centers, const Matrix& K_h)
{
    HeatKernelGrid g;
    g.centers = centers;
    g.times = {1.0};
    g.steps = {100};
    g.raw = {K_h};
    g.projected = {K_h};
    g.dt = 0.01;
    return g;
}

IdList iota_ids(int n, int first = 0)
{
    IdList ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), first);
    return ids;
}

Matrix line_points(int n, double y)
{
    Matrix X(n, 2);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = static_cast<double>(i) / (n - 1);
        X(i, 1) = y;
    }
    return X;
}

/// Two parallel arms a short ambient distance apart, one subset each.
struct Arms {
    PointCloud cloud;
    Cover cover;
    IdList centers;
};

Arms two_arms(int n)
{
    Matrix X(2 * n, 2);
    X << line_points(n, 0.15), line_points(n, -0.15);
    Arms a{PointCloud(X), make_cover({iota_ids(n), iota_ids(n, n)}), {}};
    a.centers = {n / 2, n + n / 2};
    return a;
}

/// Synthetic inducing heat whose inducing points are the first m cloud ids.
InducingHeat synthetic_heat(int m, int n, std::uint64_t seed)
{
    Matrix A = fixtures::gaussian_matrix(m + 3, n, seed);
    Matrix full = A.transpose() * A / static_cast<double>(m + 3);
    InducingHeat h;
    h.inducing = iota_ids(m);
    h.times = {1.0};
    h.uu = {full.topLeftCorner(m, m)};
    h.u_all = {full.topRows(m)};
    h.scale = {1.0};
    h.w = 0.1;
    return h;
}

} // namespace

TEST_CASE("assign picks the nearest containing center")
{
    Matrix X(4, 1);
    X << 0.0, 1.0, 2.0, 3.0;
    PointCloud cloud(X);
    Cover cover = make_cover({{0, 1, 2}, {1, 2, 3}});
    SubsetAssignment a = assign(cloud, cover, {0, 3}, {0, 1, 2, 3});
    CHECK(a.subset == IdList{0, 0, 1, 1});

    SUBCASE("equidistant centers break ties to the lower index")
    {
        Matrix Y(3, 1);
        Y << 0.0, 1.0, 2.0;
        PointCloud c3(Y);
        Cover both = make_cover({{0, 1}, {1, 2}});
        CHECK(assign(c3, both, {0, 2}, {1}).subset == IdList{0});
    }
    SUBCASE("uncovered ids are rejected")
    {
        Cover partial = make_cover({{0, 1}, {1, 2}});
        CHECK_THROWS_AS(assign(cloud, partial, {0, 2}, {3}), AssignmentError);
        CHECK_THROWS_AS(assign(cloud, cover, {0, 3}, {7}), AssignmentError);
    }
}

TEST_CASE("assign partitions the torus cloud")
{
    TorusFixture fx = torus_fixture();
    Cover cover = fixtures::torus_cover(fx);
    IdList centers;
    for (const IdList& s : cover.subsets)
        centers.push_back(medoid(fx.cloud, s));
    SubsetAssignment a = assign(fx.cloud, cover, centers, iota_ids(fx.cloud.n()));
    std::vector<int> sizes(static_cast<std::size_t>(cover.size()), 0);
    auto member = cover.membership(fx.cloud.n());
    for (std::size_t k = 0; k < a.size(); ++k) {
        int s = a.subset[k];
        ++sizes[static_cast<std::size_t>(s)];
        auto& m = member[static_cast<std::size_t>(a.ids[k])];
        CHECK(std::find(m.begin(), m.end(), s) != m.end());
    }
    CHECK(std::accumulate(sizes.begin(), sizes.end(), 0) == 625);
}

TEST_CASE("expand_heat repeats chart entries in blocks")
{
    Matrix H(3, 3);
    H << 11, 12, 13, 21, 22, 23, 31, 32, 33;
    Matrix E = expand_heat(H, IdList{0, 0, 1, 2});
    Matrix expected(4, 4);
    expected << 11, 11, 12, 13, 11, 11, 12, 13, 21, 21, 22, 23, 31, 31, 32, 33;
    CHECK(E == expected);

    Matrix one(1, 1);
    one << 0.7;
    CHECK(expand_heat(one, IdList{0, 0, 0}) == Matrix::Constant(3, 3, 0.7));
    CHECK(expand_heat(Matrix::Identity(3, 3), IdList{0, 1, 2}) == Matrix::Identity(3, 3));
    CHECK_THROWS_AS(expand_heat(H, IdList{0, 3}), ShapeError);
}

TEST_CASE("rc_kernel is the elementwise product")
{
    Matrix H(3, 3);
    H << 1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0;
    Matrix Kh = expand_heat(H, IdList{0, 0, 1, 2});
    Matrix X(4, 1);
    X << 0.0, 0.5, 1.5, 3.0;
    Matrix Kr = rbf_matrix(X, X, {1.3, 0.8, 0.0});
    Matrix K = rc_kernel(Kr, Kh);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double d = X(a, 0) - X(b, 0);
            CHECK(K(a, b) == doctest::Approx(1.3 * std::exp(-0.8 * d * d) * Kh(a, b)).epsilon(1e-15));
        }
    CHECK(rc_kernel(Kr, Matrix::Ones(4, 4)) == Kr);
    CHECK_THROWS_AS(rc_kernel(Kr, Matrix::Ones(3, 3)), ShapeError);
}

TEST_CASE("Hadamard products of PSD kernels stay PSD")
{
    Rng rng(404);
    std::uniform_int_distribution<int> nv_dist(1, 6), n_dist(5, 40), p_dist(1, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
        const int nv = nv_dist(rng), n = n_dist(rng), p = p_dist(rng);
        Matrix A = fixtures::gaussian_matrix(nv, nv, 1000 + static_cast<std::uint64_t>(trial));
        Matrix Kh = A.transpose() * A;
        IdList blocks(static_cast<std::size_t>(n));
        std::uniform_int_distribution<int> pick(0, nv - 1);
        for (int& b : blocks)
            b = pick(rng);
        Matrix X = fixtures::gaussian_matrix(n, p, 5000 + static_cast<std::uint64_t>(trial));
        RbfParams rp{std::exp(4.0 * u(rng) - 2.0), std::exp(6.0 * u(rng) - 3.0), 0.0};
        Matrix K = rc_kernel(rbf_matrix(X, X, rp), expand_heat(Kh, blocks));
        double rel = psd_check(K) / (K.trace() / n);
        worst = std::min(worst, rel);
    }
    CHECK(worst >= -1e-8);
}

TEST_CASE("psd_check reports the minimum eigenvalue")
{
    CHECK(psd_check(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
    CHECK(std::abs(psd_check(Matrix::Ones(5, 5))) < 1e-12);
    Matrix bad = Matrix::Identity(3, 3);
    bad(0, 1) = 0.1;
    CHECK_THROWS_AS(psd_check(bad), PreconditionError);
    CHECK_THROWS_AS(psd_check(Matrix::Ones(2, 3)), ShapeError);
}

TEST_CASE("a single chart reduces RC-AGP to the Euclidean GP")
{
    Matrix X = line_points(12, 0.0);
    PointCloud cloud(X);
    Cover cover = make_cover({iota_ids(12)});
    Matrix one(1, 1);
    one << 3.7;
    HeatKernelGrid grid = fixed_grid({6}, one);
    IdList train = {0, 2, 5, 7, 11};
    Vector y(5);
    y << 0.3, -0.2, 1.1, 0.4, -0.9;
    RcParams p{0, 4.0, 1.7, 0.05};
    RcAgpModel rc = make_rc_agp(cloud, cover, grid, train, y, p);
    EuclideanGp eu = make_euclidean_gp(cloud.rows(train), y, {1.7, 4.0, 0.05});
    IdList test = {1, 3, 4, 6, 8, 9, 10};
    auto a = predict_rc_agp(rc, test);
    auto b = predict_euclidean_gp(eu, cloud.rows(test));
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.var - b.var).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(rc.log_lik == doctest::Approx(eu.log_lik).epsilon(1e-10));
}

TEST_CASE("fit_rc_agp keeps the best evaluated candidate and interpolates")
{
    Arms arms = two_arms(10);
    Matrix H(2, 2);
    H << 1.0, 0.3, 0.3, 1.0;
    HeatKernelGrid grid = fixed_grid(arms.centers, H);
    grid.times = {0.5, 1.0};
    grid.steps = {50, 100};
    Matrix H2(2, 2);
    H2 << 1.0, 0.6, 0.6, 1.0;
    grid.raw.push_back(H2);
    grid.projected.push_back(H2);
    IdList train = {0, 3, 6, 9, 10, 13, 16, 19};
    Vector y(8);
    for (int k = 0; k < 8; ++k) {
        Vector s = arms.cloud.point(train[static_cast<std::size_t>(k)]);
        y(k) = std::sin(5.0 * s(0)) + (s(1) > 0 ? 0.5 : -0.5);
    }

    SUBCASE("argmax consistency")
    {
        SearchConfig sc;
        sc.budget = 400;
        RcAgpModel m = fit_rc_agp(arms.cloud, arms.cover, grid, train, y, sc);
        REQUIRE(!m.evaluated.empty());
        for (const RcCandidate& c : m.evaluated)
            CHECK(m.log_lik >= c.log_lik - 1e-9 * std::abs(c.log_lik));
        CHECK((m.params.time_index == 0 || m.params.time_index == 1));
        CHECK(m.params.sigma_r2 > 0.0);
    }
    SUBCASE("noise-free data is reproduced at the training points")
    {
        SearchConfig sc;
        sc.budget = 400;
        sc.fix_noise = true;
        sc.noise_var = 1e-12;
        RcAgpModel m = fit_rc_agp(arms.cloud, arms.cover, grid, train, y, sc);
        auto pred = predict_rc_agp(m, train);
        double range = y.maxCoeff() - y.minCoeff();
        CHECK((pred.mean - y).cwiseAbs().maxCoeff() < 1e-6 * range);
        CHECK(pred.var.minCoeff() >= -1e-10);
    }
}

TEST_CASE("weak heat coupling isolates the arms")
{
    Arms arms = two_arms(15);
    Matrix H(2, 2);
    H << 1.0, 0.005, 0.005, 1.0;
    IdList train;
    for (int i = 0; i < 15; i += 3)
        train.push_back(15 + i);
    Vector y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k)
        y(static_cast<Eigen::Index>(k)) = std::sin(6.0 * arms.cloud.points(train[k], 0));
    RcParams p{0, 10.0, 1.0, 1e-4};
    IdList upper = iota_ids(15), lower = iota_ids(15, 15);

    RcAgpModel m = make_rc_agp(arms.cloud, arms.cover, fixed_grid(arms.centers, H), train, y, p);
    auto up = predict_rc_agp(m, upper);
    auto lo = predict_rc_agp(m, lower);
    double leak = up.mean.cwiseAbs().maxCoeff() / lo.mean.cwiseAbs().maxCoeff();
    CHECK(leak < 0.2);
    for (int k = 0; k < 15; ++k)
        CHECK(up.var(k) == doctest::Approx(p.sigma_r2 * m.K_h(0, 0)).epsilon(1e-3));

    RcAgpModel flat = make_rc_agp(arms.cloud, arms.cover, fixed_grid(arms.centers, Matrix::Ones(2, 2)), train, y, p);
    auto up_flat = predict_rc_agp(flat, upper);
    auto lo_flat = predict_rc_agp(flat, lower);
    CHECK(up_flat.mean.cwiseAbs().maxCoeff() / lo_flat.mean.cwiseAbs().maxCoeff() > 0.3);
}

TEST_CASE("S-AGP with inducing equal to labeled matches the dense heat GP")
{
    const int m = 7, n = 20;
    InducingHeat h = synthetic_heat(m, n, 77);
    IdList train = iota_ids(m);
    Vector y = fixtures::gaussian_matrix(m, 1, 78).col(0);
    SAgpParams p{0, 1.8, 0.05};
    SAgpModel model = make_s_agp(h, train, y, {}, p);
    IdList test = iota_ids(n - m, m);
    auto sp = predict_s_agp(model, test);

    const Matrix& Huu = h.uu[0];
    Matrix H_sf = inducing_cross(h, 0, test);
    Matrix Q_ss = H_sf * Huu.llt().solve(Matrix(H_sf.transpose()));
    auto dense = dense_heat_gp(Huu, H_sf, Q_ss.diagonal(), y, p.rescale, p.noise_var);
    CHECK((sp.mean - dense.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((sp.var - dense.var).cwiseAbs().maxCoeff() < 1e-8);

    double dense_ll = log_marginal_likelihood(p.rescale * Huu, y, p.noise_var);
    CHECK(model.log_lik == doctest::Approx(dense_ll).epsilon(1e-10));
}

TEST_CASE("a single inducing point gives the rank-one predictor")
{
    const int n = 6;
    InducingHeat h = synthetic_heat(1, n, 91);
    const double hu = h.uu[0](0, 0);
    Vector k = h.u_all[0].row(0).transpose();
    IdList train = {1, 2, 3, 4};
    Vector kf(4);
    for (int a = 0; a < 4; ++a)
        kf(a) = k(train[static_cast<std::size_t>(a)]);
    Vector y(4);
    y << 0.4, -1.0, 0.2, 0.9;
    const double r = 0.7, s2 = 0.3, c = r / hu;
    SAgpModel model = make_s_agp(h, train, y, {}, {0, r, s2});
    auto pr = predict_s_agp(model, {5});
    const double ks = k(5);
    const double denom = s2 + c * kf.squaredNorm();
    CHECK(pr.mean(0) == doctest::Approx(c * ks * kf.dot(y) / denom).epsilon(1e-12));
    CHECK(pr.var(0) == doctest::Approx(c * ks * ks * s2 / denom).epsilon(1e-12));
}

TEST_CASE("S-AGP recovers a noiseless value at the inducing point")
{
    InducingHeat h = synthetic_heat(1, 4, 5);
    Vector y(1);
    y << 2.5;
    SAgpModel model = make_s_agp(h, {0}, y, {}, {0, 1.0, 1e-12});
    CHECK(predict_s_agp(model, {0}).mean(0) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("S-AGP predictions do not depend on inducing order")
{
    const int m = 5, n = 30;
    InducingHeat h = synthetic_heat(m, n, 12);
    IdList train = {2, 6, 7, 10, 14, 15, 19, 22, 25};
    Vector y = fixtures::gaussian_matrix(9, 1, 13).col(0);
    SAgpParams p{0, 0.9, 0.2};
    IdList test = {0, 1, 3, 8, 27, 29};
    auto a = predict_s_agp(make_s_agp(h, train, y, {}, p), test);

    std::vector<int> perm = {3, 0, 4, 2, 1};
    InducingHeat g = h;
    for (int i = 0; i < m; ++i) {
        g.inducing[static_cast<std::size_t>(i)] = h.inducing[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        g.u_all[0].row(i) = h.u_all[0].row(perm[static_cast<std::size_t>(i)]);
        for (int j = 0; j < m; ++j)
            g.uu[0](i, j) = h.uu[0](perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    auto b = predict_s_agp(make_s_agp(g, train, y, {}, p), test);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.var - b.var).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("S-AGP setup cost scales with n m^2")
{
    auto ops_for = [](int n, int m) {
        InducingHeat h = synthetic_heat(m, n + m, 3);
        Vector y = Vector::Ones(n);
        long long ops = 0;
        sor_log_likelihood(h.uu[0], inducing_cross(h, 0, iota_ids(n, m)), y, 1.0, 0.1, &ops);
        return static_cast<double>(ops);
    };
    const double base = ops_for(400, 10);
    CHECK(ops_for(800, 10) / base == doctest::Approx(2.0).epsilon(0.05));
    CHECK(ops_for(400, 20) / base == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("select_inducing places a point in every subset")
{
    TorusFixture fx = torus_fixture();
    Cover cover = fixtures::torus_cover(fx);
    for (int m : {8, 16}) {
        IdList ind = select_inducing(fx.cloud, cover, m);
        CHECK(ind.size() == static_cast<std::size_t>(m));
        for (const IdList& s : cover.subsets) {
            bool hit = std::any_of(ind.begin(), ind.end(), [&](int id) {
                return std::binary_search(s.begin(), s.end(), id);
            });
            CHECK(hit);
        }
        IdList sorted = ind;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
    CHECK_THROWS_AS(select_inducing(fx.cloud, cover, 4), PreconditionError);
}

TEST_CASE("RC-AGP rejects malformed inputs")
{
    Arms arms = two_arms(5);
    HeatKernelGrid grid = fixed_grid(arms.centers, Matrix::Identity(2, 2));
    Vector y = Vector::Ones(2);
    CHECK_THROWS_AS(make_rc_agp(arms.cloud, arms.cover, grid, {0, 1, 2}, y, {}), ShapeError);
    CHECK_THROWS_AS(make_rc_agp(arms.cloud, arms.cover, grid, {0, 42}, y, {}), DataError);
    RcParams bad;
    bad.time_index = 3;
    CHECK_THROWS_AS(make_rc_agp(arms.cloud, arms.cover, grid, {0, 1}, y, bad), PreconditionError);
    HeatKernelGrid zero = fixed_grid(arms.centers, Matrix::Zero(2, 2));
    CHECK_THROWS_AS(make_rc_agp(arms.cloud, arms.cover, zero, {0, 1}, y, {}), FitError);
}
