#pragma once

#include "atlasgp/heat_kernel.hpp"

#include <cstdint>

namespace atlasgp {

/// Primary subset of each point: the containing subset whose center is nearest.
struct SubsetAssignment {
    IdList ids;
    IdList subset;

    std::size_t size() const { return ids.size(); }
};

/// Ties go to the lower subset index.
SubsetAssignment assign(const PointCloud& cloud, const Cover& cover, const IdList& centers, const IdList& ids);

/// Entry (a, b) = K_h(rows[a], cols[b]).
Matrix expand_heat(const Matrix& K_h, const IdList& rows, const IdList& cols);
Matrix expand_heat(const Matrix& K_h, const IdList& blocks);

/// Elementwise product.
Matrix rc_kernel(const Matrix& K_rbf, const Matrix& K_heat);

/// Minimum eigenvalue; throws PreconditionError on asymmetry beyond 1e-10 relative.
double psd_check(const Matrix& K);

struct SearchConfig {
    int points_per_decade = 2;
    long budget = 4000;
    bool fix_noise = false;
    /// Used when fix_noise is set.
    double noise_var = 0.0;
    /// Log-space search range for scale and noise, relative to var(y).
    double rel_lo = 1e-4;
    double rel_hi = 1e4;
};

struct RcParams {
    int time_index = 0;
    double rho = 1.0;
    double sigma_r2 = 1.0;
    double noise_var = 1e-6;
};

struct RcCandidate {
    RcParams params;
    double log_lik = 0.0;
};

struct RcAgpModel {
    RcParams params;
    double t = 0.0;
    double log_lik = 0.0;
    /// Projected heat matrix at the chosen time, divided by heat_scale.
    Matrix K_h;
    double heat_scale = 1.0;
    IdList centers;
    Cover cover;
    PointCloud cloud;
    IdList train_ids;
    IdList train_blocks;
    Vector y;
    std::vector<RcCandidate> evaluated;

    /// Filled by finalize.
    Factor factor;
    Vector alpha;

    /// Rebuilds the factorization after loading or editing fields.
    void finalize();
};

/// sigma_r2 * (exp(-rho |s_a - s_b|^2) .* K_h[blocks]) for ambient rows A, B.
Matrix rc_covariance(const Matrix& A, const IdList& blocks_a, const Matrix& B, const IdList& blocks_b,
                     const Matrix& K_h, double rho, double sigma_r2);

double rc_log_likelihood(const Matrix& points, const IdList& blocks, const Vector& y, const Matrix& K_h,
                         const RcParams& params);

RcAgpModel fit_rc_agp(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid,
                      const IdList& ids, const Vector& y, const SearchConfig& search = {});

/// Builds a model with fixed hyperparameters.
RcAgpModel make_rc_agp(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid,
                       const IdList& ids, const Vector& y, const RcParams& params);

MarginalPrediction predict_rc_agp(const RcAgpModel& model, const IdList& test_ids);

/// m inducing points spread over the subsets round-robin, by farthest-point sampling from each medoid.
IdList select_inducing(const PointCloud& cloud, const Cover& cover, int m);

struct SAgpConfig {
    long n_paths = 2000;
    double dt = 0.01;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0};
    double w = 0.0;
    std::uint64_t seed = 0;
    int max_rejects = 50;
    SearchConfig search;
};

struct SAgpParams {
    int time_index = 0;
    double rescale = 1.0;
    double noise_var = 1e-6;
};

/// Heat estimates from inducing starts to every cloud point, per time.
struct InducingHeat {
    IdList inducing;
    IdList point_charts;
    std::vector<double> times;
    /// Per time: m x m projected block and m x n_points raw block.
    std::vector<Matrix> uu;
    std::vector<Matrix> u_all;
    std::vector<double> scale;
    double w = 0.0;
};

InducingHeat estimate_inducing_heat(const Dynamics& dyn, const PointCloud& cloud, const Cover& cover,
                                    const IdList& inducing, const SAgpConfig& config);

/// Rows of u_all for the given points; inducing points reuse the projected block.
Matrix inducing_cross(const InducingHeat& heat, int time_index, const IdList& ids);

struct SAgpModel {
    SAgpParams params;
    double log_lik = 0.0;
    InducingHeat heat;
    SAgpConfig config;
    IdList train_ids;
    Vector y;

    /// Multiply-add count of the Woodbury setup in finalize.
    long long ops = 0;
    /// Filled by finalize: factor of (noise/rescale) H_uu + H_uf H_fu and H_uf y.
    Factor a_factor;
    Vector b;

    void finalize();
};

/// SoR log likelihood by the Woodbury identity; ops receives the multiply-add count.
double sor_log_likelihood(const Matrix& H_uu, const Matrix& H_fu, const Vector& y, double rescale,
                          double noise_var, long long* ops = nullptr);

SAgpModel fit_s_agp(const InducingHeat& heat, const IdList& ids, const Vector& y, const SAgpConfig& config);
SAgpModel make_s_agp(const InducingHeat& heat, const IdList& ids, const Vector& y, const SAgpConfig& config,
                     const SAgpParams& params);
MarginalPrediction predict_s_agp(const SAgpModel& model, const IdList& test_ids);

/// Dense GP with covariance rescale * H over the given cross blocks.
MarginalPrediction dense_heat_gp(const Matrix& H_ff, const Matrix& H_sf, const Vector& H_ss_diag,
                                 const Vector& y, double rescale, double noise_var);

double rmse(const Vector& a, const Vector& b);

} // namespace atlasgp
