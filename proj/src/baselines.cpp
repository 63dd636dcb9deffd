#include "atlasgp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atlasgp {

namespace {

double variance_of(const Vector& y)
{
    double m = y.mean();
    double v = (y.array() - m).square().mean();
    return v > 0.0 ? v : 1.0;
}

double median_sq_distance(const Matrix& X)
{
    std::vector<double> d;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = i + 1; j < X.rows(); ++j)
            d.push_back((X.row(i) - X.row(j)).squaredNorm());
    if (d.empty())
        return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    double m = d[d.size() / 2];
    return m > 0.0 ? m : 1.0;
}

} // namespace

void EuclideanGp::finalize()
{
    params.validate();
    Matrix K = rbf_matrix(X, X, params);
    K.diagonal().array() += params.noise_var;
    factor = factorize(K);
    alpha = factor.solve(y);
}

EuclideanGp make_euclidean_gp(const Matrix& X, const Vector& y, const RbfParams& params)
{
    if (X.rows() != y.size() || X.rows() == 0)
        throw ShapeError("euclidean gp: inputs and targets differ in length");
    EuclideanGp m;
    m.X = X;
    m.y = y;
    m.params = params;
    m.finalize();
    Matrix K = rbf_matrix(X, X, {params.gamma, params.rho, 0.0});
    m.log_lik = log_marginal_likelihood(K, y, params.noise_var);
    return m;
}

EuclideanGp fit_euclidean_gp(const Matrix& X, const Vector& y, const SearchConfig& search)
{
    if (X.rows() != y.size() || X.rows() == 0)
        throw ShapeError("euclidean gp: inputs and targets differ in length");
    const double v = variance_of(y);
    const double d2 = median_sq_distance(X);
    std::vector<Bound> bounds = {{search.rel_lo * v, search.rel_hi * v, Scale::log},
                                 {1e-3 / d2, 1e3 / d2, Scale::log}};
    if (!search.fix_noise)
        bounds.push_back({search.rel_lo * v, search.rel_hi * v, Scale::log});
    OptimizeOptions opts;
    opts.points_per_decade = search.points_per_decade;
    opts.budget = search.budget;
    auto to_params = [&](const std::vector<double>& u) {
        return RbfParams{u[0], u[1], search.fix_noise ? search.noise_var : u[2]};
    };
    Objective f = [&](const std::vector<double>& u) {
        RbfParams p = to_params(u);
        try {
            return log_marginal_likelihood(rbf_matrix(X, X, {p.gamma, p.rho, 0.0}), y, p.noise_var);
        } catch (const NumericError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    OptimizeResult r = optimize(f, bounds, opts);
    return make_euclidean_gp(X, y, to_params(r.params));
}

MarginalPrediction predict_euclidean_gp(const EuclideanGp& model, const Matrix& Xs)
{
    Matrix K_sf = rbf_matrix(Xs, model.X, {model.params.gamma, model.params.rho, 0.0});
    Vector diag = Vector::Constant(Xs.rows(), model.params.gamma);
    return gp_predict_marginal(model.factor, model.alpha, K_sf, diag);
}

void GlConfig::validate(int n) const
{
    if (bandwidth < 0.0 || k_neighbors < 1 || n_eigs < 0 || n_eigs > n || t < 0.0)
        throw PreconditionError("gl config requires bandwidth >= 0, k >= 1, 0 <= n_eigs <= n, t >= 0");
    if (k_neighbors >= n)
        throw PreconditionError("gl config: k_neighbors must be below the point count");
}

Matrix GlSpectrum::psi() const
{
    return degree.cwiseSqrt().cwiseInverse().asDiagonal() * vectors;
}

GlSpectrum gl_spectrum(const Matrix& points, const GlConfig& config)
{
    const int n = static_cast<int>(points.rows());
    config.validate(n);
    std::vector<IdList> nn = knn(points, config.k_neighbors);
    double eps = config.bandwidth;
    if (eps <= 0.0) {
        std::vector<double> kd;
        for (int i = 0; i < n; ++i)
            kd.push_back((points.row(i) - points.row(nn[static_cast<std::size_t>(i)].back())).squaredNorm());
        std::nth_element(kd.begin(), kd.begin() + n / 2, kd.end());
        eps = kd[static_cast<std::size_t>(n / 2)];
        if (!(eps > 0.0))
            throw BaselineError("gl: zero neighbour distances");
    }
    Matrix W = Matrix::Zero(n, n);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j : nn[static_cast<std::size_t>(i)]) {
            double w = std::exp(-(points.row(i) - points.row(j)).squaredNorm() / eps);
            W(i, j) = w;
            W(j, i) = w;
            edges.emplace_back(i, j);
        }
    if (!graph_connected(n, edges))
        throw BaselineError("gl: neighbour graph is disconnected; increase k_neighbors");
    GlSpectrum s;
    s.bandwidth = eps;
    s.degree = W.rowwise().sum();
    if ((s.degree.array() <= 0.0).any())
        throw BaselineError("gl: isolated vertex; increase bandwidth or k_neighbors");
    Vector dis = s.degree.cwiseSqrt().cwiseInverse();
    Matrix L = -(dis.asDiagonal() * W * dis.asDiagonal());
    L.diagonal().array() += 1.0;
    L = 0.5 * (L + L.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(L);
    if (es.info() != Eigen::Success)
        throw NumericError("gl: eigendecomposition failed", 0.0);
    s.eigenvalues = es.eigenvalues().cwiseMax(0.0);
    s.vectors = es.eigenvectors();
    const int keep = config.n_eigs > 0 ? config.n_eigs : n;
    s.eigenvalues = s.eigenvalues.head(keep).eval();
    s.vectors = s.vectors.leftCols(keep).eval();
    return s;
}

Matrix gl_kernel(const GlSpectrum& spectrum, double t, int n_eigs)
{
    const Eigen::Index k = n_eigs > 0 ? std::min<Eigen::Index>(n_eigs, spectrum.eigenvalues.size())
                                      : spectrum.eigenvalues.size();
    Matrix P = spectrum.psi().leftCols(k);
    Vector e = (-t * spectrum.eigenvalues.head(k)).array().exp();
    return P * e.asDiagonal() * P.transpose();
}

Vector gl_heat_profile(const GlSpectrum& spectrum, int source, const IdList& targets, double t,
                       const Vector& point_area)
{
    const Eigen::Index n = spectrum.vectors.rows();
    if (point_area.size() != n)
        throw ShapeError("gl_heat_profile: one area per point required");
    if (source < 0 || source >= n)
        throw PreconditionError("gl_heat_profile: source out of range");
    Vector e = (-2.0 * t / spectrum.bandwidth * spectrum.eigenvalues).array().exp();
    Vector out(static_cast<Eigen::Index>(targets.size()));
    Vector src = spectrum.vectors.row(source).transpose().cwiseProduct(e);
    for (std::size_t a = 0; a < targets.size(); ++a) {
        int j = targets[a];
        if (j < 0 || j >= n)
            throw PreconditionError("gl_heat_profile: target out of range");
        out(static_cast<Eigen::Index>(a)) =
            spectrum.vectors.row(j).dot(src) / std::sqrt(point_area(source) * point_area(j));
    }
    return out;
}

Matrix GlGp::kernel(const IdList& rows, const IdList& cols) const
{
    Matrix P = spectrum.psi();
    Vector e = (-t * spectrum.eigenvalues).array().exp();
    Matrix A(static_cast<Eigen::Index>(rows.size()), P.cols());
    Matrix B(static_cast<Eigen::Index>(cols.size()), P.cols());
    for (std::size_t a = 0; a < rows.size(); ++a)
        A.row(static_cast<Eigen::Index>(a)) = P.row(rows[a]);
    for (std::size_t b = 0; b < cols.size(); ++b)
        B.row(static_cast<Eigen::Index>(b)) = P.row(cols[b]);
    return (A * e.asDiagonal() * B.transpose()) / kernel_scale;
}

namespace {

double gl_scale(const GlSpectrum& s, double t)
{
    Matrix P = s.psi();
    Vector e = (-t * s.eigenvalues).array().exp();
    double tr = (P.array().square().matrix() * e).mean();
    return tr > 0.0 ? tr : 1.0;
}

} // namespace

void GlGp::finalize()
{
    kernel_scale = gl_scale(spectrum, t);
    Matrix K = rescale * kernel(train_ids, train_ids);
    K.diagonal().array() += noise_var;
    factor = factorize(K);
    alpha = factor.solve(y);
    Matrix K0 = rescale * kernel(train_ids, train_ids);
    log_lik = log_marginal_likelihood(K0, y, noise_var);
}

GlGp fit_gl_gp(const PointCloud& cloud, const IdList& ids, const Vector& y, const GlConfig& config,
               const SearchConfig& search)
{
    if (static_cast<Eigen::Index>(ids.size()) != y.size() || ids.empty())
        throw ShapeError("gl gp: labeled ids and values differ in length");
    GlGp m;
    m.config = config;
    m.spectrum = gl_spectrum(cloud.points, config);
    m.train_ids = ids;
    m.y = y;
    const double v = variance_of(y);
    const bool fit_t = !(config.t > 0.0);
    std::vector<Bound> bounds;
    if (fit_t)
        bounds.push_back({1e-1, 1e4, Scale::log});
    bounds.push_back({search.rel_lo * v, search.rel_hi * v, Scale::log});
    if (!search.fix_noise)
        bounds.push_back({search.rel_lo * v, search.rel_hi * v, Scale::log});

    Matrix P = m.spectrum.psi();
    Matrix Pf(static_cast<Eigen::Index>(ids.size()), P.cols());
    for (std::size_t a = 0; a < ids.size(); ++a)
        Pf.row(static_cast<Eigen::Index>(a)) = P.row(ids[a]);
    auto unpack = [&](const std::vector<double>& u, double& t, double& s, double& nv) {
        std::size_t k = 0;
        t = fit_t ? u[k++] : config.t;
        s = u[k++];
        nv = search.fix_noise ? search.noise_var : u[k];
    };
    Objective f = [&](const std::vector<double>& u) {
        double t, s, nv;
        unpack(u, t, s, nv);
        Vector e = (-t * m.spectrum.eigenvalues).array().exp();
        double scale = (P.array().square().matrix() * e).mean();
        if (!(scale > 0.0))
            return -std::numeric_limits<double>::infinity();
        Matrix K = (s / scale) * (Pf * e.asDiagonal() * Pf.transpose());
        try {
            return log_marginal_likelihood(K, y, nv);
        } catch (const NumericError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    OptimizeOptions opts;
    opts.points_per_decade = search.points_per_decade;
    opts.budget = search.budget;
    OptimizeResult r = optimize(f, bounds, opts);
    unpack(r.params, m.t, m.rescale, m.noise_var);
    m.finalize();
    return m;
}

MarginalPrediction predict_gl_gp(const GlGp& model, const IdList& test_ids)
{
    const Eigen::Index n = model.spectrum.vectors.rows();
    for (int id : test_ids)
        if (id < 0 || id >= n)
            throw PreconditionError("gl gp: test id outside the graph");
    Matrix K_sf = model.rescale * model.kernel(test_ids, model.train_ids);
    Matrix K_ss = model.kernel(test_ids, test_ids);
    Vector diag = model.rescale * K_ss.diagonal();
    return gp_predict_marginal(model.factor, model.alpha, K_sf, diag);
}

} // namespace atlasgp
