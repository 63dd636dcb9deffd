#pragma once

#include "atlasgp/atlas.hpp"
#include "atlasgp/rng.hpp"

#include <cstdint>

namespace atlasgp {

struct SdeConfig {
    double dt = 0.01;
    int n_steps = 100;
    int n_paths = 1000;
    int max_rejects = 50;
    std::uint64_t seed = 0;
    /// Finite-difference step relative to each chart's latent scale.
    double fd_step_rel = 1e-3;
    /// Tabulate GPLVM metric fields on a latent grid instead of evaluating them per step.
    bool use_field_cache = true;
    /// Grid nodes per latent axis; 0 selects a default by latent dimension.
    int field_resolution = 0;
    /// Steps to record; empty records every step.
    std::vector<int> record_steps;

    void validate() const;
};

enum PathFlag : std::uint8_t {
    flag_reject_exhausted = 1,
    flag_transition_failed = 2,
    flag_displacement_bound = 4,
};

struct PathStep {
    int step = 0;
    int chart = 0;
    Vector latent;
    Vector ambient;
    std::uint8_t flags = 0;
};

struct BmPath {
    std::vector<PathStep> steps;
    int reject_exhaustions = 0;
    int transition_failures = 0;
    int transitions = 0;

    /// Recorded entry for the given step index, or nullptr.
    const PathStep* at(int step) const;
};

struct Start {
    int chart = 0;
    Vector latent;
};

/// Drift of the chart SDE; exact for analytic and identity charts.
Vector drift(const Chart& chart, const Vector& x, double fd_step);

/// Drift and symmetric inverse square root of the metric at one latent point.
struct LocalField {
    Vector drift;
    Matrix inv_sqrt_G;
    bool inside = false;
};

class ChartField {
public:
    ChartField(const Chart& chart, double fd_step, bool use_cache, int resolution);

    LocalField eval(const Vector& x) const;
    bool in_boundary(const Vector& x) const;
    bool cached() const { return cached_; }
    const Chart& chart() const { return *chart_; }
    double fd_step() const { return fd_step_; }

private:
    LocalField direct(const Vector& x) const;
    bool locate(const Vector& x, std::vector<int>& base, std::vector<double>& frac) const;

    const Chart* chart_;
    double fd_step_;
    bool cached_ = false;
    int q_ = 0;
    int res_ = 0;
    Vector lo_;
    Vector step_;
    // Per node: var, drift (q), inv_sqrt_G (q*q).
    std::vector<double> values_;
    int stride_ = 0;
};

class Dynamics {
public:
    Dynamics(const Atlas& atlas, const SdeConfig& config);

    const Atlas& atlas() const { return *atlas_; }
    const SdeConfig& config() const { return config_; }
    const ChartField& field(int chart) const { return fields_[static_cast<std::size_t>(chart)]; }

private:
    const Atlas* atlas_;
    SdeConfig config_;
    std::vector<ChartField> fields_;
};

/// One Euler-Maruyama proposal.
Vector step(const Chart& chart, const Vector& x, double dt, Rng& rng, double fd_step);

/// The run config supplies dt, n_steps, n_paths, max_rejects, seed and record_steps;
/// the field settings come from the config the dynamics were built with.
BmPath simulate_path(const Dynamics& dyn, const Start& start, Rng& rng, const SdeConfig& run);
BmPath simulate_path(const Dynamics& dyn, const Start& start, Rng& rng);

/// Paths ordered by (start, path); each path uses its own derived stream.
std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts,
                                      const SdeConfig& run);
std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts);

namespace serial {
std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts,
                                      const SdeConfig& run);
}

struct EnsembleStats {
    long steps = 0;
    long reject_exhaustions = 0;
    long transition_failures = 0;
    long transitions = 0;
};

EnsembleStats ensemble_stats(const std::vector<BmPath>& paths, const SdeConfig& config);

} // namespace atlasgp
