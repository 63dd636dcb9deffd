#pragma once

#include "atlasgp/io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace atlasgp::cli {

struct DecomposeOpts {
    std::string cloud;
    std::string out;
    int n_subsets = 8;
    int q = 2;
    int overlap_k = 5;
    int projection_dim = 0;
    int max_iter = 100;
    std::uint64_t seed = 0;
};

struct LearnAtlasOpts {
    std::string cloud;
    std::string cover;
    std::string out;
    int q = 2;
    std::string kind = "auto";
    std::string init = "isomap";
    int max_outer_iters = 50;
    double identity_margin = -1.0;
    std::uint64_t seed = 0;
};

struct SimulateOpts {
    std::string atlas;
    std::string starts;
    std::string out;
    double dt = 0.01;
    int steps = 100;
    int paths = 100;
    int max_rejects = 50;
    std::vector<int> record;
    bool no_cache = false;
    std::uint64_t seed = 0;
};

struct EstimateKernelOpts {
    std::string atlas;
    std::string cover;
    std::string out;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0};
    long paths = 2000;
    double window = 0.0;
    double dt = 0.01;
    int max_rejects = 50;
    std::uint64_t seed = 0;
};

struct FitOpts {
    std::string model;
    std::string cloud;
    std::string atlas;
    std::string grid;
    std::string labeled;
    std::string out;
    int points_per_decade = 2;
    long budget = 4000;
    double fix_noise = -1.0;
    int inducing = 8;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0};
    long paths = 2000;
    double window = 0.0;
    double dt = 0.01;
    int gl_k = 10;
    int gl_eigs = 0;
    double gl_bandwidth = 0.0;
    double gl_t = 0.0;
    std::uint64_t seed = 0;
};

struct PredictOpts {
    std::string model;
    std::string test;
    std::string out;
    std::string atlas;
};

struct BenchmarkOpts {
    std::string suite = "ushape";
    std::string out;
    double snr_db = 30.0;
    int replicates = 10;
    int labeled = 30;
    long paths = 0;
    std::vector<std::string> methods;
    std::vector<int> inducing;
    std::uint64_t seed = 0;
};

int decompose(const DecomposeOpts& o);
int learn_atlas(const LearnAtlasOpts& o);
int simulate(const SimulateOpts& o);
int estimate_kernel(const EstimateKernelOpts& o);
int fit(const FitOpts& o);
int predict(const PredictOpts& o);
int benchmark(const BenchmarkOpts& o);
int selftest();

} // namespace atlasgp::cli
