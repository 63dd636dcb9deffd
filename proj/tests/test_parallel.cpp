#include <doctest.h>

#include "fixtures.hpp"

#include "atlasgp/heat_kernel.hpp"

#include <numeric>

#include <omp.h>

using namespace atlasgp;

namespace {

struct ThreadScope {
    explicit ThreadScope(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
    ~ThreadScope() { omp_set_num_threads(saved_); }

private:
    int saved_;
};

bool same_paths(const std::vector<BmPath>& a, const std::vector<BmPath>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const BmPath& p = a[k];
        const BmPath& q = b[k];
        if (p.steps.size() != q.steps.size() || p.transitions != q.transitions ||
            p.reject_exhaustions != q.reject_exhaustions || p.transition_failures != q.transition_failures)
            return false;
        for (std::size_t s = 0; s < p.steps.size(); ++s) {
            const PathStep& x = p.steps[s];
            const PathStep& y = q.steps[s];
            if (x.step != y.step || x.chart != y.chart || x.flags != y.flags || x.latent != y.latent ||
                x.ambient != y.ambient)
                return false;
        }
    }
    return true;
}

Atlas arc_atlas()
{
    const int n = 15;
    Matrix X(n, 2);
    for (int i = 0; i < n; ++i) {
        double a = 2.0 * i / (n - 1);
        X(i, 0) = std::cos(a);
        X(i, 1) = std::sin(a);
    }
    PointCloud cloud(X);
    IdList ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return assemble_atlas({train_gplvm(cloud, ids, 1)}, n);
}

} // namespace

TEST_CASE("rbf_matrix matches its serial reference exactly")
{
    ThreadScope threads(4);
    Matrix X = fixtures::gaussian_matrix(137, 3, 1);
    Matrix Y = fixtures::gaussian_matrix(61, 3, 2);
    RbfParams p{1.7, 0.45, 0.0};
    CHECK(rbf_matrix(X, Y, p) == serial::rbf_matrix(X, Y, p));
    CHECK(rbf_matrix(X, X, p) == serial::rbf_matrix(X, X, p));
}

TEST_CASE("ensembles do not depend on the thread count")
{
    CircleFixture fx = circle_fixture(40);
    Atlas circle = circle_atlas(fx);
    Atlas arc = arc_atlas();
    for (const Atlas* atlas : {&circle, &arc}) {
        SdeConfig c;
        c.dt = 0.01;
        c.n_steps = 60;
        c.n_paths = 50;
        c.seed = 17;
        Dynamics dyn(*atlas, c);
        std::vector<Start> starts = {{0, atlas->charts[0].latent.row(0).transpose()},
                                     {0, atlas->charts[0].latent.row(3).transpose()}};
        std::vector<BmPath> ref = serial::simulate_ensemble(dyn, starts, c);
        for (int t : {1, 2, 4}) {
            ThreadScope threads(t);
            CHECK(same_paths(simulate_ensemble(dyn, starts, c), ref));
        }
    }
}

TEST_CASE("hit counts match the serial reference exactly")
{
    CircleFixture fx = circle_fixture(40);
    Atlas atlas = circle_atlas(fx);
    SdeConfig c;
    c.dt = 0.01;
    c.n_steps = 80;
    c.n_paths = 400;
    c.seed = 5;
    c.record_steps = {20, 40, 80};
    Dynamics dyn(atlas, c);
    std::vector<BmPath> paths = serial::simulate_ensemble(dyn, {{0, Vector::Zero(1)}}, c);
    std::vector<DensityTarget> targets;
    for (int k = 0; k < 12; ++k)
        targets.push_back({k % 2, Vector::Constant(1, -2.0 + 0.35 * k)});
    HitCounter counter(atlas, targets, {0.1});
    auto ref = serial::count_all(counter, paths, 0, paths.size(), c.record_steps);
    CHECK(ref.sum() > 0);
    for (int t : {1, 3, 4}) {
        ThreadScope threads(t);
        CHECK(counter.count_all(paths, 0, paths.size(), c.record_steps) == ref);
        CHECK(counter.count_all(paths, 100, 250, c.record_steps) ==
              serial::count_all(counter, paths, 100, 250, c.record_steps));
    }
    CHECK_THROWS_AS(counter.count_all(paths, 0, paths.size(), {21}), PreconditionError);
    CHECK_THROWS_AS(counter.count_all(paths, 10, 5, c.record_steps), PreconditionError);
}
