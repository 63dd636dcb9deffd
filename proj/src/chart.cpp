#include "atlasgp/chart.hpp"
#include "atlasgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace atlasgp {

namespace {

std::uint64_t hash_cell(const std::vector<long long>& cell)
{
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (long long v : cell)
        h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return h;
}

std::uint64_t cell_key(const Vector& x, double size)
{
    std::vector<long long> cell(static_cast<std::size_t>(x.size()));
    for (Eigen::Index c = 0; c < x.size(); ++c)
        cell[static_cast<std::size_t>(c)] = static_cast<long long>(std::floor(x(c) / size));
    return hash_cell(cell);
}

constexpr double kPi = std::numbers::pi;
constexpr double kLog2Pi = 1.8378770664093453;
} // namespace

std::string to_string(ChartKind kind)
{
    switch (kind) {
    case ChartKind::gplvm:
        return "gplvm";
    case ChartKind::identity:
        return "identity";
    case ChartKind::analytic_circle:
        return "analytic_circle";
    case ChartKind::analytic_torus:
        return "analytic_torus";
    }
    return "unknown";
}

ChartKind chart_kind_from_string(const std::string& name)
{
    if (name == "gplvm")
        return ChartKind::gplvm;
    if (name == "identity")
        return ChartKind::identity;
    if (name == "analytic_circle")
        return ChartKind::analytic_circle;
    if (name == "analytic_torus")
        return ChartKind::analytic_torus;
    throw DataError("unknown chart kind '" + name + "'");
}

double wrap_angle(double a)
{
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi)
        w += 2.0 * kPi;
    return w;
}

MetricTensor metric_from(const Matrix& G_in)
{
    const Eigen::Index q = G_in.rows();
    MetricTensor m;
    m.G = 0.5 * (G_in + G_in.transpose());
    double floor = 1e-8 * m.G.trace() / static_cast<double>(q);
    if (!(floor > 0.0))
        floor = 1e-300;
    if (q == 1) {
        double g = std::max(m.G(0, 0), floor);
        m.det_G = g;
        m.inv_G = Matrix::Constant(1, 1, 1.0 / g);
        m.inv_sqrt_G = Matrix::Constant(1, 1, 1.0 / std::sqrt(g));
        return m;
    }
    if (m.G.isDiagonal(0.0)) {
        Vector d = m.G.diagonal().cwiseMax(floor);
        m.det_G = d.prod();
        m.inv_G = d.cwiseInverse().asDiagonal();
        m.inv_sqrt_G = d.cwiseSqrt().cwiseInverse().asDiagonal();
        return m;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.G);
    Vector ev = es.eigenvalues().cwiseMax(floor);
    const Matrix& V = es.eigenvectors();
    m.det_G = ev.prod();
    m.inv_G = V * ev.cwiseInverse().asDiagonal() * V.transpose();
    m.inv_sqrt_G = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    m.inv_G = 0.5 * (m.inv_G + m.inv_G.transpose()).eval();
    m.inv_sqrt_G = 0.5 * (m.inv_sqrt_G + m.inv_sqrt_G.transpose()).eval();
    return m;
}

double gplvm_log_likelihood(const Matrix& X, const Matrix& Y, const RbfParams& params)
{
    Matrix K = rbf_matrix(X, X, params);
    K.diagonal().array() += params.noise_var;
    Factor f = factorize(K);
    Matrix alpha = f.solve(Y);
    const double n = static_cast<double>(Y.rows());
    const double p = static_cast<double>(Y.cols());
    return -0.5 * p * f.log_det() - 0.5 * (Y.array() * alpha.array()).sum() - 0.5 * n * p * kLog2Pi;
}

Matrix isomap_embed(const Matrix& Y, int q, int k)
{
    const int n = static_cast<int>(Y.rows());
    if (q < 1 || q >= n)
        throw PreconditionError("isomap_embed: need 1 <= q < n");
    k = std::clamp(k, 1, n - 1);
    std::vector<std::vector<std::pair<int, double>>> adj;
    while (true) {
        std::vector<IdList> nb = knn(Y, k);
        adj.assign(static_cast<std::size_t>(n), {});
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i)
            for (int j : nb[static_cast<std::size_t>(i)]) {
                double d = (Y.row(i) - Y.row(j)).norm();
                adj[static_cast<std::size_t>(i)].emplace_back(j, d);
                adj[static_cast<std::size_t>(j)].emplace_back(i, d);
                edges.emplace_back(i, j);
            }
        if (graph_connected(n, edges) || k >= n - 1)
            break;
        k = std::min(n - 1, k + 2);
    }

    Matrix D2(n, n);
    for (int src = 0; src < n; ++src) {
        std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
        dist[static_cast<std::size_t>(src)] = 0.0;
        pq.emplace(0.0, src);
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[static_cast<std::size_t>(u)])
                continue;
            for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
                double nd = d + w;
                if (nd < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    pq.emplace(nd, v);
                }
            }
        }
        for (int j = 0; j < n; ++j)
            D2(src, j) = dist[static_cast<std::size_t>(j)] * dist[static_cast<std::size_t>(j)];
    }
    D2 = 0.5 * (D2 + D2.transpose()).eval();
    Vector row_mean = D2.rowwise().mean();
    double all_mean = row_mean.mean();
    Matrix B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            B(i, j) = -0.5 * (D2(i, j) - row_mean(i) - row_mean(j) + all_mean);
    Eigen::SelfAdjointEigenSolver<Matrix> es(B);
    Matrix X(n, q);
    double top = es.eigenvalues()(n - 1);
    for (int c = 0; c < q; ++c) {
        double lam = es.eigenvalues()(n - 1 - c);
        if (!(lam > 1e-12 * top))
            throw TrainingError("isomap_embed: degenerate geodesic spectrum");
        Vector v = es.eigenvectors().col(n - 1 - c);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0)
            v = -v;
        X.col(c) = v * std::sqrt(lam);
    }
    return X;
}

Vector Chart::kernel_vector(const Vector& x) const
{
    const Eigen::Index n = latent.rows();
    Vector k(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d2 = 0.0;
        for (Eigen::Index c = 0; c < latent.cols(); ++c) {
            double d = x(c) - latent(j, c);
            d2 += d * d;
        }
        k(j) = params.gamma * std::exp(-params.rho * d2);
    }
    return k;
}

void Chart::finalize()
{
    if (latent.rows() != ambient.rows() || static_cast<std::size_t>(latent.rows()) != subset_ids.size())
        throw ShapeError("chart: latent, ambient and subset_ids disagree in size");
    cells_.clear();
    if (kind != ChartKind::gplvm) {
        k_inv_.resize(0, 0);
        alpha_.resize(0, 0);
        if (kind == ChartKind::identity && identity_support > 0.0)
            for (Eigen::Index j = 0; j < latent.rows(); ++j)
                cells_[cell_key(latent.row(j).transpose(), identity_support)].push_back(static_cast<int>(j));
        return;
    }
    params.validate();
    if (center.size() != ambient.cols())
        center = ambient.colwise().mean().transpose();
    Matrix K = rbf_matrix(latent, latent, params);
    K.diagonal().array() += params.noise_var;
    Factor f = factorize(K);
    jitter_ = f.jitter;
    k_inv_ = f.solve(Matrix(Matrix::Identity(K.rows(), K.cols())));
    k_inv_ = 0.5 * (k_inv_ + k_inv_.transpose()).eval();
    Matrix Yc = ambient.rowwise() - center.transpose();
    alpha_ = f.solve(Yc);
}

double Chart::log_likelihood() const
{
    if (kind != ChartKind::gplvm)
        return 0.0;
    Matrix Yc = ambient.rowwise() - center.transpose();
    return gplvm_log_likelihood(latent, Yc, params);
}

Vector Chart::forward_mean(const Vector& x) const
{
    switch (kind) {
    case ChartKind::identity:
        return x;
    case ChartKind::analytic_circle: {
        double a = x(0) + analytic.offset;
        Vector s(2);
        s << std::cos(a), std::sin(a);
        return s;
    }
    case ChartKind::analytic_torus: {
        double th = x(0), ph = x(1);
        double rad = analytic.R + analytic.r * std::cos(th);
        Vector s(3);
        s << rad * std::cos(ph), rad * std::sin(ph), analytic.r * std::sin(th);
        return s;
    }
    case ChartKind::gplvm:
        break;
    }
    Vector k = kernel_vector(x);
    return center + alpha_.transpose() * k;
}

double Chart::forward_var(const Vector& x) const
{
    if (kind != ChartKind::gplvm)
        return 0.0;
    Vector k = kernel_vector(x);
    return params.gamma - k.dot(k_inv_ * k);
}

ForwardResult Chart::forward(const Vector& x) const
{
    if (x.size() != q())
        throw ShapeError("forward: latent dimension mismatch");
    ForwardResult r;
    if (kind != ChartKind::gplvm) {
        r.mean = forward_mean(x);
        r.var = 0.0;
        return r;
    }
    Vector k = kernel_vector(x);
    r.mean = center + alpha_.transpose() * k;
    r.var = params.gamma - k.dot(k_inv_ * k);
    return r;
}

Matrix Chart::jacobian_mean(const Vector& x) const
{
    switch (kind) {
    case ChartKind::identity:
        return Matrix::Identity(p(), q());
    case ChartKind::analytic_circle: {
        double a = x(0) + analytic.offset;
        Matrix J(2, 1);
        J << -std::sin(a), std::cos(a);
        return J;
    }
    case ChartKind::analytic_torus: {
        double th = x(0), ph = x(1);
        double rad = analytic.R + analytic.r * std::cos(th);
        Matrix J(3, 2);
        J << -analytic.r * std::sin(th) * std::cos(ph), -rad * std::sin(ph),
            -analytic.r * std::sin(th) * std::sin(ph), rad * std::cos(ph),
            analytic.r * std::cos(th), 0.0;
        return J;
    }
    case ChartKind::gplvm:
        break;
    }
    Vector k = kernel_vector(x);
    Matrix dK(latent.rows(), latent.cols());
    for (Eigen::Index j = 0; j < latent.rows(); ++j)
        for (Eigen::Index l = 0; l < latent.cols(); ++l)
            dK(j, l) = 2.0 * params.rho * (latent(j, l) - x(l)) * k(j);
    return alpha_.transpose() * dK;
}

JacobianDist Chart::jacobian_dist(const Vector& x) const
{
    if (x.size() != q())
        throw ShapeError("jacobian_dist: latent dimension mismatch");
    JacobianDist jd;
    if (kind == ChartKind::identity)
        throw PreconditionError("jacobian_dist: not applicable to identity charts");
    if (kind != ChartKind::gplvm) {
        jd.mean = jacobian_mean(x);
        jd.cov = Matrix::Zero(q(), q());
        return jd;
    }
    Vector k = kernel_vector(x);
    Matrix dK(latent.rows(), latent.cols());
    for (Eigen::Index j = 0; j < latent.rows(); ++j)
        for (Eigen::Index l = 0; l < latent.cols(); ++l)
            dK(j, l) = 2.0 * params.rho * (latent(j, l) - x(l)) * k(j);
    jd.mean = alpha_.transpose() * dK;
    jd.cov = 2.0 * params.rho * params.gamma * Matrix::Identity(q(), q()) - dK.transpose() * k_inv_ * dK;
    jd.cov = 0.5 * (jd.cov + jd.cov.transpose()).eval();
    return jd;
}

MetricTensor Chart::expected_metric(const Vector& x) const
{
    switch (kind) {
    case ChartKind::identity:
        return metric_from(Matrix::Identity(q(), q()));
    case ChartKind::analytic_circle:
        return metric_from(Matrix::Identity(1, 1));
    case ChartKind::analytic_torus: {
        double rad = analytic.R + analytic.r * std::cos(x(0));
        Matrix G = Matrix::Zero(2, 2);
        G(0, 0) = analytic.r * analytic.r;
        G(1, 1) = rad * rad;
        return metric_from(G);
    }
    case ChartKind::gplvm:
        break;
    }
    JacobianDist jd = jacobian_dist(x);
    return metric_from(jd.mean.transpose() * jd.mean + static_cast<double>(p()) * jd.cov);
}

double Chart::magnification_factor(const Vector& x) const
{
    return std::sqrt(expected_metric(x).det_G);
}

bool Chart::near_support(const Vector& x) const
{
    const int q = static_cast<int>(x.size());
    std::vector<long long> base(static_cast<std::size_t>(q));
    for (int c = 0; c < q; ++c)
        base[static_cast<std::size_t>(c)] = static_cast<long long>(std::floor(x(c) / identity_support));
    const double r2 = identity_support * identity_support;
    int combos = 1;
    for (int c = 0; c < q; ++c)
        combos *= 3;
    std::vector<long long> cell(static_cast<std::size_t>(q));
    for (int m = 0; m < combos; ++m) {
        int rem = m;
        for (int c = 0; c < q; ++c) {
            cell[static_cast<std::size_t>(c)] = base[static_cast<std::size_t>(c)] + rem % 3 - 1;
            rem /= 3;
        }
        auto it = cells_.find(hash_cell(cell));
        if (it == cells_.end())
            continue;
        for (int j : it->second)
            if ((latent.row(j).transpose() - x).squaredNorm() <= r2)
                return true;
    }
    return false;
}

bool Chart::in_boundary(const Vector& x) const
{
    switch (kind) {
    case ChartKind::identity:
        for (Eigen::Index c = 0; c < x.size(); ++c)
            if (x(c) < box_lo(c) - identity_margin || x(c) > box_hi(c) + identity_margin)
                return false;
        return identity_support <= 0.0 || near_support(x);
    case ChartKind::analytic_circle:
        return std::abs(wrap_angle(x(0))) < analytic.half_width;
    case ChartKind::analytic_torus:
        return true;
    case ChartKind::gplvm:
        break;
    }
    return forward_var(x) <= boundary_var_threshold;
}

Vector Chart::canonical(const Vector& x) const
{
    if (kind != ChartKind::analytic_circle && kind != ChartKind::analytic_torus)
        return x;
    Vector y = x;
    for (Eigen::Index c = 0; c < y.size(); ++c)
        y(c) = wrap_angle(y(c));
    return y;
}

Vector Chart::latent_delta(const Vector& a, const Vector& b) const
{
    Vector d = a - b;
    if (kind == ChartKind::analytic_circle || kind == ChartKind::analytic_torus)
        for (Eigen::Index c = 0; c < d.size(); ++c)
            d(c) = wrap_angle(d(c));
    return d;
}

double Chart::latent_scale() const
{
    if (latent.rows() < 2)
        return 1.0;
    Matrix C = latent.rowwise() - latent.colwise().mean();
    double s = std::sqrt(C.squaredNorm() / static_cast<double>(latent.rows() * latent.cols()));
    return s > 0.0 ? s : 1.0;
}

int Chart::nearest_ambient(const Vector& s) const
{
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < ambient.rows(); ++j) {
        double d = (ambient.row(j).transpose() - s).squaredNorm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

int Chart::nearest_latent(const Vector& x) const
{
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < latent.rows(); ++j) {
        double d = latent_delta(latent.row(j).transpose(), x).squaredNorm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

double Chart::backward_objective(const Vector& x, const Vector& s) const
{
    Vector k = kernel_vector(x);
    Vector mu = center + alpha_.transpose() * k;
    double v = params.gamma - k.dot(k_inv_ * k) + params.noise_var;
    if (!(v > 0.0))
        v = std::max(params.noise_var, 1e-300);
    return -0.5 * static_cast<double>(p()) * std::log(v) - 0.5 * (s - mu).squaredNorm() / v;
}

Vector Chart::backward(const Vector& s, const BackwardOptions& options) const
{
    if (s.size() != p())
        throw ShapeError("backward: ambient dimension mismatch");
    switch (kind) {
    case ChartKind::identity:
        return s;
    case ChartKind::analytic_circle: {
        Vector x(1);
        x(0) = wrap_angle(std::atan2(s(1), s(0)) - analytic.offset);
        return x;
    }
    case ChartKind::analytic_torus: {
        Vector x(2);
        double ph = std::atan2(s(1), s(0));
        double th = std::atan2(s(2), std::hypot(s(0), s(1)) - analytic.R);
        x << th, ph;
        return x;
    }
    case ChartKind::gplvm:
        break;
    }

    Vector x = latent.row(nearest_ambient(s)).transpose();
    Vector r = s - forward_mean(x);
    double cost = r.squaredNorm();
    const double ell = 1.0 / std::sqrt(params.rho);
    double lambda = 1e-4;
    for (int it = 0; it < options.max_gauss_newton; ++it) {
        Matrix J = jacobian_mean(x);
        Matrix H = J.transpose() * J;
        Vector g = J.transpose() * r;
        Matrix A = H;
        A.diagonal().array() += lambda * (H.diagonal().array() + 1e-12);
        Vector delta = A.ldlt().solve(g);
        if (!delta.allFinite())
            break;
        Vector xn = x + delta;
        Vector rn = s - forward_mean(xn);
        double cn = rn.squaredNorm();
        if (cn < cost) {
            double gain = cost - cn;
            x = xn;
            r = rn;
            cost = cn;
            lambda = std::max(lambda * 0.1, 1e-12);
            if (delta.norm() < 1e-10 * ell || gain < 1e-14 * (1.0 + cost))
                break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e8)
                break;
        }
    }

    if (options.full_likelihood) {
        double best = backward_objective(x, s);
        if (!std::isfinite(best))
            throw BackwardMapError("backward: non-finite objective");
        double h = 1e-2 * ell;
        int evals = 0;
        while (h > 1e-7 * ell && evals < options.max_polish_evals) {
            bool improved = false;
            for (Eigen::Index c = 0; c < x.size() && !improved; ++c)
                for (int sign : {1, -1}) {
                    Vector cand = x;
                    cand(c) += sign * h;
                    double v = backward_objective(cand, s);
                    ++evals;
                    if (v > best) {
                        best = v;
                        x = cand;
                        improved = true;
                        break;
                    }
                }
            if (!improved)
                h *= 0.5;
        }
    }
    if (!x.allFinite())
        throw BackwardMapError("backward: non-finite latent estimate");
    return x;
}

namespace {

double median_nn_distance(const Matrix& Y)
{
    const Eigen::Index n = Y.rows();
    if (n < 2)
        return 1.0;
    std::vector<double> d(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j)
                best = std::min(best, (Y.row(i) - Y.row(j)).squaredNorm());
        d[static_cast<std::size_t>(i)] = std::sqrt(best);
    }
    std::nth_element(d.begin(), d.begin() + n / 2, d.end());
    return d[static_cast<std::size_t>(n / 2)];
}

double median_pairwise_sq(const Matrix& X)
{
    std::vector<double> d;
    const Eigen::Index n = X.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d.push_back((X.row(i) - X.row(j)).squaredNorm());
    if (d.empty())
        return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    double m = d[d.size() / 2];
    return m > 0.0 ? m : 1.0;
}

// One pass of per-point coordinate ascent; each point maximizes its
// leave-one-out predictive density given the others.
void latent_sweep(Matrix& X, const Matrix& Y, const RbfParams& params, int max_evals)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index q = X.cols();
    const double p = static_cast<double>(Y.cols());
    Matrix K = rbf_matrix(X, X, params);
    K.diagonal().array() += params.noise_var;
    Factor f = factorize(K);
    Matrix A = f.solve(Matrix(Matrix::Identity(n, n)));
    A = 0.5 * (A + A.transpose()).eval();
    const double kappa = params.gamma + params.noise_var + f.jitter;
    const double ell = 1.0 / std::sqrt(params.rho);

    Matrix M(n, n);
    Matrix B(n, Y.cols());
    Vector kv(n);
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector a = A.col(i);
        double aii = A(i, i);
        M.noalias() = A - a * a.transpose() / aii;
        M.row(i).setZero();
        M.col(i).setZero();
        B.noalias() = M * Y;
        Vector yi = Y.row(i).transpose();

        auto eval = [&](const Vector& x, bool keep) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    kv(j) = 0.0;
                    continue;
                }
                double d2 = 0.0;
                for (Eigen::Index c = 0; c < q; ++c) {
                    double d = x(c) - X(j, c);
                    d2 += d * d;
                }
                kv(j) = params.gamma * std::exp(-params.rho * d2);
            }
            Vector uu = M * kv;
            double s = kappa - kv.dot(uu);
            if (keep)
                u = uu;
            if (!(s > 0.0))
                return -std::numeric_limits<double>::infinity();
            Vector r = yi - B.transpose() * kv;
            return -0.5 * p * std::log(s) - 0.5 * r.squaredNorm() / s;
        };

        Vector x = X.row(i).transpose();
        Vector x0 = x;
        double best = eval(x, false);
        int evals = 1;
        double h = 0.1 * ell;
        while (h > 1e-3 * ell && evals < max_evals) {
            bool improved = false;
            for (Eigen::Index c = 0; c < q && !improved && evals < max_evals; ++c)
                for (int sign : {1, -1}) {
                    Vector cand = x;
                    cand(c) += sign * h;
                    double v = eval(cand, false);
                    ++evals;
                    if (v > best) {
                        best = v;
                        x = cand;
                        improved = true;
                        break;
                    }
                }
            if (!improved)
                h *= 0.5;
        }
        if (x == x0)
            continue;
        eval(x, true);
        double s = kappa - kv.dot(u);
        if (!(s > 0.0))
            continue;
        A = M + u * u.transpose() / s;
        A.col(i) = -u / s;
        A.row(i) = -u.transpose() / s;
        A(i, i) = 1.0 / s;
        X.row(i) = x.transpose();
    }
}

} // namespace

Chart train_gplvm(const PointCloud& cloud, const IdList& ids, int q, const GplvmConfig& config)
{
    const int n = static_cast<int>(ids.size());
    if (q < 1 || q > cloud.p())
        throw PreconditionError("train_gplvm: q must be in [1, p]");
    if (n < q + 2)
        throw PreconditionError("train_gplvm: subset has " + std::to_string(n) +
                                " points, need at least q+2 = " + std::to_string(q + 2));
    Chart c;
    c.kind = ChartKind::gplvm;
    c.subset_ids = ids;
    c.ambient = cloud.rows(ids);
    c.center = c.ambient.colwise().mean().transpose();
    c.seed = config.seed;
    Matrix Y = c.ambient.rowwise() - c.center.transpose();

    Matrix X;
    if (config.init == LatentInit::isomap) {
        try {
            X = isomap_embed(Y, q, config.isomap_k);
        } catch (const TrainingError&) {
            X = pca_project(Y, q);
        }
    } else {
        X = pca_project(Y, q);
    }

    const double v = std::max(Y.squaredNorm() / (static_cast<double>(n) * Y.cols()), 1e-300);
    const double d2 = median_pairwise_sq(X);
    std::vector<Bound> bounds = {
        {1e-2 * v, 1e2 * v, Scale::log},
        {1e-2 / d2, 1e3 / d2, Scale::log},
        {config.noise_floor * v, 1e-1 * v, Scale::log},
    };
    auto objective_for = [&](const Matrix& Xc) {
        return [&Xc, &Y](const std::vector<double>& th) {
            try {
                return gplvm_log_likelihood(Xc, Y, {th[0], th[1], th[2]});
            } catch (const NumericError&) {
                return -std::numeric_limits<double>::infinity();
            }
        };
    };

    OptimizeOptions init_opts;
    init_opts.points_per_decade = config.hyper_points_per_decade;
    init_opts.budget = config.hyper_budget_initial;
    OptimizeResult hr;
    try {
        hr = optimize(objective_for(X), bounds, init_opts);
    } catch (const OptimizationError& e) {
        throw TrainingError(std::string("train_gplvm: likelihood non-finite at initialization: ") + e.what());
    }
    RbfParams params{hr.params[0], hr.params[1], hr.params[2]};
    double L = hr.value;
    c.likelihood_history.push_back(L);

    for (int it = 0; it < config.max_outer_iters; ++it) {
        double L_start = L;
        Matrix Xn = X;
        latent_sweep(Xn, Y, params, config.latent_evals_per_point);
        double Ln = -std::numeric_limits<double>::infinity();
        try {
            Ln = gplvm_log_likelihood(Xn, Y, params);
        } catch (const NumericError&) {
        }
        if (Ln >= L) {
            X = Xn;
            L = Ln;
        }
        OptimizeOptions step_opts;
        step_opts.start = std::vector<double>{params.gamma, params.rho, params.noise_var};
        step_opts.start_step = 0.1;
        step_opts.budget = config.hyper_budget_step;
        step_opts.parallel = false;
        OptimizeResult r = optimize(objective_for(X), bounds, step_opts);
        if (r.value >= L) {
            params = {r.params[0], r.params[1], r.params[2]};
            L = r.value;
        }
        c.likelihood_history.push_back(L);
        if (L - L_start < config.rel_tol * std::abs(L))
            break;
    }

    c.latent = X;
    c.params = params;
    c.boundary_var_threshold = config.boundary_fraction * params.gamma;
    c.finalize();
    return c;
}

Chart make_identity_chart(const PointCloud& cloud, const IdList& ids, double margin)
{
    if (ids.empty())
        throw PreconditionError("make_identity_chart: empty subset");
    Chart c;
    c.kind = ChartKind::identity;
    c.subset_ids = ids;
    c.ambient = cloud.rows(ids);
    c.latent = c.ambient;
    c.center = Vector::Zero(cloud.p());
    c.params = {1.0, 1.0, 0.0};
    c.boundary_var_threshold = 0.5;
    c.box_lo = c.ambient.colwise().minCoeff().transpose();
    c.box_hi = c.ambient.colwise().maxCoeff().transpose();
    const double spacing = median_nn_distance(c.ambient);
    c.identity_margin = margin >= 0.0 ? margin : 0.5 * spacing;
    c.identity_support = std::max(c.identity_margin, 0.75 * spacing);
    c.finalize();
    return c;
}

Chart make_circle_chart(const PointCloud& cloud, const IdList& ids, double offset, double half_width)
{
    if (cloud.p() != 2)
        throw PreconditionError("make_circle_chart: ambient dimension must be 2");
    Chart c;
    c.kind = ChartKind::analytic_circle;
    c.subset_ids = ids;
    c.ambient = cloud.rows(ids);
    c.analytic.offset = offset;
    c.analytic.half_width = half_width;
    c.params = {1.0, 1.0, 0.0};
    c.boundary_var_threshold = 1.0;
    c.center = Vector::Zero(2);
    c.latent.resize(c.ambient.rows(), 1);
    for (Eigen::Index j = 0; j < c.ambient.rows(); ++j)
        c.latent.row(j) = c.backward(c.ambient.row(j).transpose()).transpose();
    c.finalize();
    return c;
}

Chart make_torus_chart(const PointCloud& cloud, const IdList& ids, double R, double r)
{
    if (cloud.p() != 3)
        throw PreconditionError("make_torus_chart: ambient dimension must be 3");
    Chart c;
    c.kind = ChartKind::analytic_torus;
    c.subset_ids = ids;
    c.ambient = cloud.rows(ids);
    c.analytic.R = R;
    c.analytic.r = r;
    c.params = {1.0, 1.0, 0.0};
    c.boundary_var_threshold = 1.0;
    c.center = Vector::Zero(3);
    c.latent.resize(c.ambient.rows(), 2);
    for (Eigen::Index j = 0; j < c.ambient.rows(); ++j)
        c.latent.row(j) = c.backward(c.ambient.row(j).transpose()).transpose();
    c.finalize();
    return c;
}

} // namespace atlasgp
