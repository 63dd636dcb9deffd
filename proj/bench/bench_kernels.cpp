#include <benchmark/benchmark.h>

#include "atlasgp/gp_core.hpp"
#include "atlasgp/heat_kernel.hpp"
#include "atlasgp/oracles.hpp"

#include <random>

using namespace atlasgp;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> n;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = n(rng);
    return m;
}

struct CircleSetup {
    Atlas atlas;
    SdeConfig run;
    std::vector<DensityTarget> targets;

    CircleSetup() : atlas(circle_atlas(circle_fixture(60)))
    {
        run.dt = 0.01;
        run.n_steps = 100;
        run.n_paths = 2000;
        run.seed = 3;
        run.record_steps = {25, 50, 100};
        for (int k = 0; k < 16; ++k)
            targets.push_back({k % 2, Vector::Constant(1, -2.5 + 0.3 * k)});
    }
};

const CircleSetup& circle()
{
    static const CircleSetup s;
    return s;
}

template <bool Serial>
void rbf(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    Matrix X = random_matrix(n, 3, 1);
    RbfParams p{1.0, 0.5, 0.0};
    for (auto _ : state) {
        Matrix K = Serial ? serial::rbf_matrix(X, X, p) : rbf_matrix(X, X, p);
        benchmark::DoNotOptimize(K.data());
    }
}

template <bool Serial>
void ensemble(benchmark::State& state)
{
    const CircleSetup& s = circle();
    Dynamics dyn(s.atlas, s.run);
    for (auto _ : state) {
        auto paths = Serial ? serial::simulate_ensemble(dyn, {{0, Vector::Zero(1)}}, s.run)
                            : simulate_ensemble(dyn, {{0, Vector::Zero(1)}}, s.run);
        benchmark::DoNotOptimize(paths.data());
    }
}

template <bool Serial>
void hits(benchmark::State& state)
{
    const CircleSetup& s = circle();
    Dynamics dyn(s.atlas, s.run);
    auto paths = serial::simulate_ensemble(dyn, {{0, Vector::Zero(1)}}, s.run);
    HitCounter counter(s.atlas, s.targets, {0.1});
    for (auto _ : state) {
        auto c = Serial ? serial::count_all(counter, paths, 0, paths.size(), s.run.record_steps)
                        : counter.count_all(paths, 0, paths.size(), s.run.record_steps);
        benchmark::DoNotOptimize(c.data());
    }
}

} // namespace

BENCHMARK(rbf<true>)->Name("rbf_matrix/serial")->Arg(256)->Arg(1024);
BENCHMARK(rbf<false>)->Name("rbf_matrix/openmp")->Arg(256)->Arg(1024);
BENCHMARK(ensemble<true>)->Name("simulate_ensemble/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(ensemble<false>)->Name("simulate_ensemble/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(hits<true>)->Name("count_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(hits<false>)->Name("count_all/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
