#pragma once

#include "atlasgp/agp.hpp"

namespace atlasgp {

/// RBF GP on ambient coordinates.
struct EuclideanGp {
    RbfParams params;
    Matrix X;
    Vector y;
    double log_lik = 0.0;
    Factor factor;
    Vector alpha;

    void finalize();
};

EuclideanGp make_euclidean_gp(const Matrix& X, const Vector& y, const RbfParams& params);
EuclideanGp fit_euclidean_gp(const Matrix& X, const Vector& y, const SearchConfig& search = {});
MarginalPrediction predict_euclidean_gp(const EuclideanGp& model, const Matrix& Xs);

struct GlConfig {
    /// Edge weights exp(-d^2 / bandwidth); 0 selects the median squared k-th neighbour distance.
    double bandwidth = 0.0;
    int k_neighbors = 10;
    /// 0 keeps every eigenpair.
    int n_eigs = 0;
    /// Diffusion time; 0 searches it by marginal likelihood.
    double t = 0.0;

    void validate(int n) const;
};

/// Spectrum of the random-walk Laplacian I - D^-1 W through its symmetric form.
struct GlSpectrum {
    Vector eigenvalues;
    /// Orthonormal eigenvectors of the symmetric form; psi = D^-1/2 v.
    Matrix vectors;
    Vector degree;
    double bandwidth = 0.0;

    Matrix psi() const;
};

GlSpectrum gl_spectrum(const Matrix& points, const GlConfig& config);

/// sum_k exp(-lambda_k t) psi_k psi_k^T over the leading n_eigs pairs.
Matrix gl_kernel(const GlSpectrum& spectrum, double t, int n_eigs = 0);

/// Heat density of the process with generator half the Laplace-Beltrami operator,
/// using eigenvalues scaled by 2 / bandwidth and the given per-point areas.
Vector gl_heat_profile(const GlSpectrum& spectrum, int source, const IdList& targets, double t,
                       const Vector& point_area);

struct GlGp {
    GlConfig config;
    GlSpectrum spectrum;
    double t = 1.0;
    double rescale = 1.0;
    double noise_var = 1e-6;
    double kernel_scale = 1.0;
    IdList train_ids;
    Vector y;
    double log_lik = 0.0;
    Factor factor;
    Vector alpha;

    void finalize();
    /// Normalized kernel rows for the given ids against the given columns.
    Matrix kernel(const IdList& rows, const IdList& cols) const;
};

GlGp fit_gl_gp(const PointCloud& cloud, const IdList& ids, const Vector& y, const GlConfig& config,
               const SearchConfig& search = {});
MarginalPrediction predict_gl_gp(const GlGp& model, const IdList& test_ids);

} // namespace atlasgp
