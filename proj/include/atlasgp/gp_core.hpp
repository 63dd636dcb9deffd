#pragma once

#include "atlasgp/types.hpp"

#include <functional>
#include <optional>
#include <span>

namespace atlasgp {

struct RbfParams {
    double gamma = 1.0;
    double rho = 1.0;
    double noise_var = 0.0;

    void validate() const;
};

/// gamma * exp(-rho * |x_i - y_j|^2)
Matrix rbf_matrix(const Matrix& X, const Matrix& Y, const RbfParams& params);

namespace serial {
Matrix rbf_matrix(const Matrix& X, const Matrix& Y, const RbfParams& params);
}

/// Cholesky factor of a symmetric matrix with the jitter ladder applied.
struct Factor {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;

    Matrix solve(const Matrix& B) const { return llt.solve(B); }
    Vector solve(const Vector& b) const { return llt.solve(b); }
    double log_det() const;
    Eigen::Index size() const { return llt.rows(); }
};

Factor factorize(const Matrix& A);

double log_marginal_likelihood(const Matrix& K, const Vector& y, double noise_var);

struct Prediction {
    Vector mean;
    Matrix cov;
};

Prediction gp_predict(const Matrix& K_ff, const Matrix& K_sf, const Matrix& K_ss,
                      const Vector& y, double noise_var);

/// Mean and marginal variances only; K_ss_diag holds the prior variances.
struct MarginalPrediction {
    Vector mean;
    Vector var;
};

MarginalPrediction gp_predict_marginal(const Factor& factor, const Vector& alpha,
                                       const Matrix& K_sf, const Vector& K_ss_diag);

enum class Scale { log, linear };

struct Bound {
    double lo = 0.0;
    double hi = 0.0;
    Scale scale = Scale::log;
};

struct OptimizeOptions {
    int points_per_decade = 8;
    int linear_points = 17;
    long budget = 200000;
    double tolerance = 1e-6;
    std::optional<std::vector<double>> start;
    /// Initial coordinate step (transformed units) when starting from a point; 0 selects range/4.
    double start_step = 0.0;
    bool parallel = true;
};

struct OptimizeResult {
    std::vector<double> params;
    double value = 0.0;
    long evaluations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Maximizes the objective: grid search then coordinate descent.
OptimizeResult optimize(const Objective& objective, std::span<const Bound> bounds,
                        const OptimizeOptions& options = {});

/// Symmetric eigendecomposition with negative eigenvalues clipped to zero.
Matrix psd_project(const Matrix& K);

/// Minimum eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& K);

} // namespace atlasgp
