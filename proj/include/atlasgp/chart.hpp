#pragma once

#include "atlasgp/cover.hpp"
#include "atlasgp/gp_core.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>

namespace atlasgp {

enum class ChartKind { gplvm, identity, analytic_circle, analytic_torus };

std::string to_string(ChartKind kind);
ChartKind chart_kind_from_string(const std::string& name);

struct JacobianDist {
    Matrix mean; // p x q
    Matrix cov;  // q x q
};

struct MetricTensor {
    Matrix G;
    double det_G = 1.0;
    Matrix inv_G;
    Matrix inv_sqrt_G;
};

/// Symmetrizes, floors eigenvalues at 1e-8 * trace / q and fills the derived fields.
MetricTensor metric_from(const Matrix& G);

struct ForwardResult {
    Vector mean;
    double var = 0.0;
};

enum class LatentInit { pca, isomap };

struct GplvmConfig {
    int max_outer_iters = 50;
    double rel_tol = 1e-6;
    std::uint64_t seed = 0;
    LatentInit init = LatentInit::isomap;
    int isomap_k = 8;
    double boundary_fraction = 0.5;
    int hyper_points_per_decade = 2;
    long hyper_budget_initial = 4000;
    long hyper_budget_step = 80;
    int latent_evals_per_point = 24;
    double noise_floor = 1e-5;
};

struct AnalyticParams {
    double R = 2.0;
    double r = 1.3;
    double offset = 0.0;
    double half_width = 0.0;
};

struct BackwardOptions {
    bool full_likelihood = true;
    int max_gauss_newton = 30;
    int max_polish_evals = 200;
};

class Chart {
public:
    ChartKind kind = ChartKind::gplvm;
    IdList subset_ids;
    Matrix latent;
    Matrix ambient;
    RbfParams params;
    double boundary_var_threshold = 0.5;
    Vector center;
    Vector box_lo;
    Vector box_hi;
    double identity_margin = 0.0;
    /// Identity charts also require a training point within this distance; 0 disables.
    double identity_support = 0.0;
    AnalyticParams analytic;
    std::vector<double> likelihood_history;
    std::uint64_t seed = 0;

    int q() const { return static_cast<int>(latent.cols()); }
    int p() const { return static_cast<int>(ambient.cols()); }
    int size() const { return static_cast<int>(latent.rows()); }

    /// Rebuilds factorization caches; call after editing fields.
    void finalize();

    ForwardResult forward(const Vector& x) const;
    Vector forward_mean(const Vector& x) const;
    double forward_var(const Vector& x) const;
    Vector backward(const Vector& s, const BackwardOptions& options = {}) const;
    JacobianDist jacobian_dist(const Vector& x) const;
    Matrix jacobian_mean(const Vector& x) const;
    MetricTensor expected_metric(const Vector& x) const;
    double magnification_factor(const Vector& x) const;
    bool in_boundary(const Vector& x) const;

    /// Wraps periodic latent coordinates into (-pi, pi].
    Vector canonical(const Vector& x) const;
    /// a - b, wrapped for periodic coordinates.
    Vector latent_delta(const Vector& a, const Vector& b) const;
    /// Root-mean-square spread of the training latents.
    double latent_scale() const;
    /// Index of the training point nearest to s in ambient space.
    int nearest_ambient(const Vector& s) const;
    /// Index of the training point nearest to x in latent space.
    int nearest_latent(const Vector& x) const;
    /// GPLVM log likelihood of the stored latents and parameters.
    double log_likelihood() const;

    const Matrix& k_inv() const { return k_inv_; }
    const Matrix& alpha() const { return alpha_; }

private:
    Vector kernel_vector(const Vector& x) const;
    double backward_objective(const Vector& x, const Vector& s) const;

    bool near_support(const Vector& x) const;

    Matrix k_inv_;
    Matrix alpha_;
    double jitter_ = 0.0;
    std::unordered_map<std::uint64_t, IdList> cells_;
};

double wrap_angle(double a);

double gplvm_log_likelihood(const Matrix& X, const Matrix& Y, const RbfParams& params);

/// Geodesic multidimensional scaling on a k-nearest-neighbour graph.
Matrix isomap_embed(const Matrix& Y, int q, int k);

Chart train_gplvm(const PointCloud& cloud, const IdList& ids, int q, const GplvmConfig& config = {});

/// margin < 0 selects half the median nearest-neighbour spacing of the subset;
/// the support radius is the larger of the margin and 0.75 times that spacing.
Chart make_identity_chart(const PointCloud& cloud, const IdList& ids, double margin = -1.0);

Chart make_circle_chart(const PointCloud& cloud, const IdList& ids, double offset, double half_width);

Chart make_torus_chart(const PointCloud& cloud, const IdList& ids, double R = 2.0, double r = 1.3);

} // namespace atlasgp
