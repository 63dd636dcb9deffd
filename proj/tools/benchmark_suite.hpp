#pragma once

#include "atlasgp/baselines.hpp"
#include "atlasgp/io.hpp"
#include "atlasgp/oracles.hpp"

#include <iosfwd>
#include <string>

namespace atlasgp::suite {

struct Fixture {
    std::string name;
    PointCloud cloud;
    /// Noise-free function value at every point.
    Vector truth;
    Cover cover;
    int q = 2;
    AtlasKind kind = AtlasKind::automatic;
};

/// Ring sectors x tube halves of the angle grid, grown by overlap_k neighbours.
Cover torus_cover(const TorusFixture& fx, int overlap_k, int n_ring = 4, int n_tube = 2);
Fixture torus_benchmark(int overlap_k = 5);
/// Equal along-arm segments, grown by overlap_k neighbours.
Fixture ushape_benchmark(int overlap_k = 5);

struct BenchConfig {
    std::string suite = "ushape";
    double snr_db = 30.0;
    int replicates = 10;
    std::uint64_t seed = 0;
    int n_labeled = 30;
    int overlap_k = 5;
    long n_paths = 4000;
    double dt = 0.01;
    std::vector<double> times;
    double w = 0.0;
    std::vector<std::string> methods;
    std::vector<int> inducing;
    GlConfig gl;
    SearchConfig search;
};

/// Suite defaults for times, window and methods.
BenchConfig default_config(const std::string& suite);
Json config_json(const BenchConfig& config);

struct Replicate {
    IdList ids;
    Vector y;
};

Replicate make_replicate(const Fixture& fx, int n_labeled, double snr_db, std::uint64_t seed, int rep);

struct MethodRmse {
    std::string method;
    std::vector<double> rmse;

    double mean() const;
    /// Sample standard deviation.
    double sd() const;
};

struct BenchResult {
    std::vector<MethodRmse> methods;
    double seconds = 0.0;

    const MethodRmse& method(const std::string& name) const;
};

BenchResult run_benchmark(const BenchConfig& config, std::ostream* log = nullptr);

void write_results_csv(const std::string& path, const BenchResult& result, const Json& header);

} // namespace atlasgp::suite
