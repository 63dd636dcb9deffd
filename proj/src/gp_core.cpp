#include "atlasgp/gp_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace atlasgp {

void RbfParams::validate() const
{
    if (!(gamma > 0.0) || !(rho > 0.0) || !(noise_var >= 0.0))
        throw PreconditionError("rbf params require gamma > 0, rho > 0, noise_var >= 0");
}

namespace {

void check_rbf_shapes(const Matrix& X, const Matrix& Y, const RbfParams& params)
{
    params.validate();
    if (X.cols() != Y.cols() || X.cols() < 1)
        throw ShapeError("rbf_matrix: column count mismatch (" + std::to_string(X.cols()) +
                         " vs " + std::to_string(Y.cols()) + ")");
}

inline double rbf_entry(const Matrix& X, Eigen::Index i, const Matrix& Y, Eigen::Index j,
                        const RbfParams& p)
{
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        double d = X(i, c) - Y(j, c);
        d2 += d * d;
    }
    return p.gamma * std::exp(-p.rho * d2);
}

} // namespace

Matrix rbf_matrix(const Matrix& X, const Matrix& Y, const RbfParams& params)
{
    check_rbf_shapes(X, Y, params);
    Matrix K(X.rows(), Y.rows());
    const Eigen::Index m = X.rows(), mm = Y.rows();
#pragma omp parallel for schedule(static) if (m * mm > 4096)
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < mm; ++j)
            K(i, j) = rbf_entry(X, i, Y, j, params);
    return K;
}

namespace serial {

Matrix rbf_matrix(const Matrix& X, const Matrix& Y, const RbfParams& params)
{
    check_rbf_shapes(X, Y, params);
    Matrix K(X.rows(), Y.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.rows(); ++j)
            K(i, j) = rbf_entry(X, i, Y, j, params);
    return K;
}

} // namespace serial

double Factor::log_det() const
{
    const Matrix& L = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        s += std::log(L(i, i));
    return 2.0 * s;
}

Factor factorize(const Matrix& A)
{
    if (A.rows() != A.cols())
        throw ShapeError("factorize: matrix is not square");
    if (!A.allFinite())
        throw NumericError("factorize: non-finite matrix entries", 0.0);
    Factor f;
    f.llt.compute(A);
    if (f.llt.info() == Eigen::Success)
        return f;

    double mean_diag = A.rows() > 0 ? A.diagonal().mean() : 1.0;
    if (!(mean_diag > 0.0))
        mean_diag = 1.0;
    double jitter = 0.0;
    for (int e = -10; e <= -4; ++e) {
        jitter = std::pow(10.0, e) * mean_diag;
        Matrix B = A;
        B.diagonal().array() += jitter;
        f.llt.compute(B);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = jitter;
            return f;
        }
    }
    throw NumericError("Cholesky failed after jitter " + std::to_string(jitter), jitter);
}

double log_marginal_likelihood(const Matrix& K, const Vector& y, double noise_var)
{
    if (K.rows() != K.cols() || K.rows() != y.size())
        throw ShapeError("log_marginal_likelihood: shape mismatch");
    Matrix A = K;
    A.diagonal().array() += noise_var;
    Factor f = factorize(A);
    Vector alpha = f.solve(y);
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha) - 0.5 * f.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Prediction gp_predict(const Matrix& K_ff, const Matrix& K_sf, const Matrix& K_ss,
                      const Vector& y, double noise_var)
{
    if (K_ff.rows() != K_ff.cols() || K_ff.rows() != y.size() || K_sf.cols() != K_ff.rows() ||
        K_ss.rows() != K_sf.rows() || K_ss.cols() != K_sf.rows())
        throw ShapeError("gp_predict: shape mismatch");
    Matrix A = K_ff;
    A.diagonal().array() += noise_var;
    Factor f = factorize(A);
    Vector alpha = f.solve(y);
    Prediction out;
    out.mean = K_sf * alpha;
    Matrix V = f.llt.matrixL().solve(K_sf.transpose());
    out.cov = K_ss - V.transpose() * V;
    return out;
}

MarginalPrediction gp_predict_marginal(const Factor& factor, const Vector& alpha,
                                       const Matrix& K_sf, const Vector& K_ss_diag)
{
    if (K_sf.cols() != factor.size() || K_ss_diag.size() != K_sf.rows())
        throw ShapeError("gp_predict_marginal: shape mismatch");
    MarginalPrediction out;
    out.mean = K_sf * alpha;
    Matrix V = factor.llt.matrixL().solve(K_sf.transpose());
    out.var = K_ss_diag - V.colwise().squaredNorm().transpose();
    return out;
}

namespace {

struct Axis {
    double lo_u = 0.0;
    double hi_u = 0.0;
    int count = 1;
    Scale scale = Scale::log;

    double to_param(double u, const Bound& b) const
    {
        double v = scale == Scale::log ? std::pow(10.0, u) : u;
        return std::clamp(v, b.lo, b.hi);
    }
    double node(int k) const
    {
        if (count <= 1)
            return lo_u;
        if (k == count - 1)
            return hi_u;
        return lo_u + (hi_u - lo_u) * k / (count - 1);
    }
};

} // namespace

OptimizeResult optimize(const Objective& objective, std::span<const Bound> bounds,
                        const OptimizeOptions& options)
{
    const std::size_t d = bounds.size();
    if (d == 0)
        throw PreconditionError("optimize: no parameters");
    if (options.budget < 1)
        throw PreconditionError("optimize: budget must be >= 1");

    std::vector<Axis> axes(d);
    for (std::size_t i = 0; i < d; ++i) {
        const Bound& b = bounds[i];
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
            throw PreconditionError("optimize: bounds must be finite with lo <= hi");
        if (b.scale == Scale::log && !(b.lo > 0.0))
            throw PreconditionError("optimize: log-scale bounds must be positive");
        Axis& a = axes[i];
        a.scale = b.scale;
        a.lo_u = b.scale == Scale::log ? std::log10(b.lo) : b.lo;
        a.hi_u = b.scale == Scale::log ? std::log10(b.hi) : b.hi;
        if (b.lo == b.hi)
            a.count = 1;
        else if (b.scale == Scale::log)
            a.count = std::max(2, static_cast<int>(std::ceil((a.hi_u - a.lo_u) *
                                                             options.points_per_decade - 1e-9)) + 1);
        else
            a.count = std::max(2, options.linear_points);
    }

    auto to_params = [&](const std::vector<double>& u) {
        std::vector<double> p(d);
        for (std::size_t i = 0; i < d; ++i)
            p[i] = axes[i].to_param(u[i], bounds[i]);
        return p;
    };
    auto evaluate = [&](const std::vector<double>& u) {
        double v = objective(to_params(u));
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };

    OptimizeResult result;
    std::vector<double> best_u(d);
    double best = -std::numeric_limits<double>::infinity();

    if (options.start) {
        if (options.start->size() != d)
            throw ShapeError("optimize: start point has wrong dimension");
        for (std::size_t i = 0; i < d; ++i) {
            double v = std::clamp((*options.start)[i], bounds[i].lo, bounds[i].hi);
            best_u[i] = axes[i].scale == Scale::log ? std::log10(v) : v;
        }
        best = evaluate(best_u);
        result.evaluations = 1;
        if (!std::isfinite(best))
            throw OptimizationError("optimize: objective non-finite at the start point");
    } else {
        double total = 1.0;
        for (const Axis& a : axes)
            total *= a.count;
        double target = std::max(1.0, static_cast<double>(options.budget) / 2.0);
        if (total > target) {
            double f = std::pow(target / total, 1.0 / static_cast<double>(d));
            for (Axis& a : axes)
                if (a.count > 1)
                    a.count = std::max(2, static_cast<int>(std::floor(a.count * f)));
        }
        long n_grid = 1;
        for (const Axis& a : axes)
            n_grid *= a.count;

        std::vector<double> values(static_cast<std::size_t>(n_grid));
        auto grid_point = [&](long idx) {
            std::vector<double> u(d);
            for (std::size_t k = d; k-- > 0;) {
                u[k] = axes[k].node(static_cast<int>(idx % axes[k].count));
                idx /= axes[k].count;
            }
            return u;
        };
#pragma omp parallel for schedule(dynamic) if (options.parallel)
        for (long g = 0; g < n_grid; ++g)
            values[static_cast<std::size_t>(g)] = evaluate(grid_point(g));
        result.evaluations = n_grid;

        long best_idx = -1;
        for (long g = 0; g < n_grid; ++g) {
            if (values[static_cast<std::size_t>(g)] > best) {
                best = values[static_cast<std::size_t>(g)];
                best_idx = g;
            }
        }
        if (best_idx < 0)
            throw OptimizationError("optimize: objective non-finite at every grid point");
        best_u = grid_point(best_idx);
    }

    std::vector<double> step(d);
    std::vector<double> min_step(d);
    for (std::size_t i = 0; i < d; ++i) {
        const Axis& a = axes[i];
        double range = a.hi_u - a.lo_u;
        if (options.start)
            step[i] = options.start_step > 0.0 ? std::min(options.start_step, range) : range / 4.0;
        else
            step[i] = a.count > 1 ? range / (a.count - 1) : range / 4.0;
        min_step[i] = options.tolerance * range;
    }

    while (result.evaluations < options.budget) {
        bool improved = false;
        for (std::size_t i = 0; i < d && result.evaluations < options.budget; ++i) {
            if (step[i] <= min_step[i])
                continue;
            for (int sign : {1, -1}) {
                std::vector<double> cand = best_u;
                cand[i] = std::clamp(best_u[i] + sign * step[i], axes[i].lo_u, axes[i].hi_u);
                if (cand[i] == best_u[i])
                    continue;
                double v = evaluate(cand);
                ++result.evaluations;
                if (v > best) {
                    best = v;
                    best_u = cand;
                    improved = true;
                    break;
                }
                if (result.evaluations >= options.budget)
                    break;
            }
        }
        if (!improved) {
            bool active = false;
            for (std::size_t i = 0; i < d; ++i) {
                step[i] *= 0.5;
                active = active || step[i] > min_step[i];
            }
            if (!active)
                break;
        }
    }

    result.params = to_params(best_u);
    result.value = best;
    return result;
}

Matrix psd_project(const Matrix& K)
{
    if (K.rows() != K.cols())
        throw ShapeError("psd_project: matrix is not square");
    Matrix S = 0.5 * (K + K.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    Vector ev = es.eigenvalues().cwiseMax(0.0);
    Matrix P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (P + P.transpose());
}

double min_eigenvalue(const Matrix& K)
{
    if (K.rows() != K.cols())
        throw ShapeError("min_eigenvalue: matrix is not square");
    if (K.rows() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace atlasgp
