#pragma once

#include "atlasgp/bm_sim.hpp"

namespace atlasgp {

struct NeighborhoodSpec {
    double w = 0.05;
};

struct DensityTarget {
    int chart = 0;
    Vector latent;
};

struct DensityEstimate {
    double value = 0.0;
    long hits = 0;
    long n = 0;
    double volume = 0.0;
    double se = 0.0;
};

double standard_error(long n_hits, long n, double volume);

/// (2w)^q * sqrt(det G) at the target.
double window_volume(const Atlas& atlas, const DensityTarget& target, double w);

/// Counts window hits of recorded path positions; one row per step, one column per target.
class HitCounter {
public:
    HitCounter(const Atlas& atlas, std::vector<DensityTarget> targets, const NeighborhoodSpec& spec);

    /// Adds hits for one path at the given steps into counts (steps x targets).
    void count(const BmPath& path, const std::vector<int>& steps, Eigen::Matrix<long, -1, -1>& counts) const;

    Eigen::Matrix<long, -1, -1> count_all(const std::vector<BmPath>& paths, std::size_t begin,
                                          std::size_t end, const std::vector<int>& steps) const;

    const std::vector<DensityTarget>& targets() const { return targets_; }
    double volume(std::size_t t) const { return volumes_[t]; }

private:
    bool inside_window(const Chart& chart, const Vector& x, const DensityTarget& target) const;

    const Atlas* atlas_;
    std::vector<DensityTarget> targets_;
    NeighborhoodSpec spec_;
    std::vector<double> volumes_;
    std::vector<Vector> target_ambient_;
    std::vector<double> reach_;
    std::vector<IdList> by_chart_;
};

namespace serial {
Eigen::Matrix<long, -1, -1> count_all(const HitCounter& counter, const std::vector<BmPath>& paths,
                                      std::size_t begin, std::size_t end, const std::vector<int>& steps);
}

DensityEstimate estimate_density(const Atlas& atlas, const std::vector<BmPath>& paths, int step,
                                 const DensityTarget& target, const NeighborhoodSpec& spec);

/// Profile of density estimates for many targets from one start at one step.
/// run.n_steps and run.record_steps are overridden by step.
std::vector<DensityEstimate> estimate_profile(const Dynamics& dyn, const Start& start,
                                              const std::vector<DensityTarget>& targets, int step,
                                              const NeighborhoodSpec& spec, const SdeConfig& run);

/// Default window: 0.1 x median nearest-neighbour latent spacing x sqrt(q).
double default_window(const Atlas& atlas);

struct GridConfig {
    long n_paths = 2000;
    double dt = 0.01;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0};
    double w = 0.0;
    std::uint64_t seed = 0;
    int max_rejects = 50;
};

struct HeatKernelGrid {
    IdList centers;
    std::vector<DensityTarget> center_targets;
    std::vector<double> times;
    std::vector<int> steps;
    std::vector<Matrix> raw;
    std::vector<Matrix> projected;
    long n_paths = 0;
    double w = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(centers.size()); }
    int time_index(double t) const;
};

/// Step index for t, requiring t to be a multiple of dt.
int time_to_step(double t, double dt);

/// Centers are the medoids of the cover subsets; chart i must be built from subset i.
HeatKernelGrid build_grid(const Dynamics& dyn, const PointCloud& cloud, const Cover& cover,
                          const GridConfig& config);

/// Symmetrize then clip negative eigenvalues.
Matrix symmetrize_project(const Matrix& raw);

} // namespace atlasgp
