#include "atlasgp/agp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

namespace atlasgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double variance_of(const Vector& y)
{
    if (y.size() < 1)
        throw PreconditionError("empty target vector");
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

IdList medoids(const PointCloud& cloud, const Cover& cover)
{
    IdList out;
    for (const IdList& s : cover.subsets)
        out.push_back(medoid(cloud, s));
    return out;
}

void check_labels(const PointCloud& cloud, const IdList& ids, const Vector& y)
{
    if (static_cast<Eigen::Index>(ids.size()) != y.size())
        throw ShapeError("labeled ids and values differ in length");
    if (ids.empty())
        throw PreconditionError("no labeled points");
    for (int id : ids)
        if (id < 0 || id >= cloud.n())
            throw DataError("labeled id " + std::to_string(id) + " outside the cloud");
    if (!y.allFinite())
        throw DataError("labeled values must be finite");
}

} // namespace

SubsetAssignment assign(const PointCloud& cloud, const Cover& cover, const IdList& centers, const IdList& ids)
{
    if (static_cast<int>(centers.size()) != cover.size())
        throw PreconditionError("assign: one center per subset required");
    std::vector<IdList> member = cover.membership(cloud.n());
    SubsetAssignment a;
    a.ids = ids;
    for (int id : ids) {
        if (id < 0 || id >= cloud.n())
            throw AssignmentError("assign: id " + std::to_string(id) + " outside the cloud");
        const IdList& in = member[static_cast<std::size_t>(id)];
        if (in.empty())
            throw AssignmentError("assign: id " + std::to_string(id) + " is not covered");
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int s : in) {
            double d = (cloud.points.row(id) - cloud.points.row(centers[static_cast<std::size_t>(s)])).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = s;
            }
        }
        a.subset.push_back(best);
    }
    return a;
}

Matrix expand_heat(const Matrix& K_h, const IdList& rows, const IdList& cols)
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) {
            int i = rows[a];
            int j = cols[b];
            if (i < 0 || j < 0 || i >= K_h.rows() || j >= K_h.cols())
                throw ShapeError("expand_heat: block index out of range");
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = K_h(i, j);
        }
    return out;
}

Matrix expand_heat(const Matrix& K_h, const IdList& blocks)
{
    return expand_heat(K_h, blocks, blocks);
}

Matrix rc_kernel(const Matrix& K_rbf, const Matrix& K_heat)
{
    if (K_rbf.rows() != K_heat.rows() || K_rbf.cols() != K_heat.cols())
        throw ShapeError("rc_kernel: shape mismatch");
    return K_rbf.cwiseProduct(K_heat);
}

double psd_check(const Matrix& K)
{
    if (K.rows() != K.cols())
        throw ShapeError("psd_check: matrix must be square");
    double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw PreconditionError("psd_check: matrix is not symmetric");
    return min_eigenvalue(K);
}

Matrix rc_covariance(const Matrix& A, const IdList& blocks_a, const Matrix& B, const IdList& blocks_b,
                     const Matrix& K_h, double rho, double sigma_r2)
{
    Matrix K = rbf_matrix(A, B, {1.0, rho, 0.0});
    return sigma_r2 * rc_kernel(K, expand_heat(K_h, blocks_a, blocks_b));
}

double rc_log_likelihood(const Matrix& points, const IdList& blocks, const Vector& y, const Matrix& K_h,
                         const RcParams& params)
{
    Matrix K = rc_covariance(points, blocks, points, blocks, K_h, params.rho, params.sigma_r2);
    return log_marginal_likelihood(K, y, params.noise_var);
}

namespace {

struct RcSetup {
    Matrix points;
    IdList blocks;
    std::vector<Matrix> heats;
    std::vector<double> scales;
};

RcSetup rc_setup(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid, const IdList& ids)
{
    if (grid.projected.empty())
        throw PreconditionError("fit: heat kernel grid is empty");
    if (grid.size() != cover.size())
        throw PreconditionError("fit: grid and cover sizes differ");
    RcSetup s;
    s.points = cloud.rows(ids);
    s.blocks = assign(cloud, cover, grid.centers, ids).subset;
    for (const Matrix& P : grid.projected) {
        double scale = P.diagonal().mean();
        if (!(scale > 0.0))
            throw FitError("fit: heat matrix has no positive diagonal");
        s.heats.push_back(P / scale);
        s.scales.push_back(scale);
    }
    return s;
}

RcAgpModel rc_model(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid, const IdList& ids,
                    const Vector& y, const RcSetup& s, const RcParams& params)
{
    RcAgpModel m;
    m.params = params;
    m.t = grid.times[static_cast<std::size_t>(params.time_index)];
    m.K_h = s.heats[static_cast<std::size_t>(params.time_index)];
    m.heat_scale = s.scales[static_cast<std::size_t>(params.time_index)];
    m.centers = grid.centers;
    m.cover = cover;
    m.cloud = cloud;
    m.train_ids = ids;
    m.train_blocks = s.blocks;
    m.y = y;
    m.finalize();
    m.log_lik = rc_log_likelihood(s.points, s.blocks, y, m.K_h, params);
    return m;
}

} // namespace

void RcAgpModel::finalize()
{
    Matrix X = cloud.rows(train_ids);
    Matrix K = rc_covariance(X, train_blocks, X, train_blocks, K_h, params.rho, params.sigma_r2);
    K.diagonal().array() += params.noise_var;
    factor = factorize(K);
    alpha = factor.solve(y);
}

RcAgpModel make_rc_agp(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid,
                       const IdList& ids, const Vector& y, const RcParams& params)
{
    check_labels(cloud, ids, y);
    if (params.time_index < 0 || params.time_index >= static_cast<int>(grid.times.size()))
        throw PreconditionError("rc-agp: time index out of range");
    RcSetup s = rc_setup(cloud, cover, grid, ids);
    return rc_model(cloud, cover, grid, ids, y, s, params);
}

RcAgpModel fit_rc_agp(const PointCloud& cloud, const Cover& cover, const HeatKernelGrid& grid,
                      const IdList& ids, const Vector& y, const SearchConfig& search)
{
    check_labels(cloud, ids, y);
    RcSetup s = rc_setup(cloud, cover, grid, ids);
    const double v = variance_of(y);
    const double d2 = median_sq_distance(s.points);

    std::vector<Bound> bounds = {{1e-3 / d2, 1e3 / d2, Scale::log},
                                 {search.rel_lo * v, search.rel_hi * v, Scale::log}};
    if (!search.fix_noise)
        bounds.push_back({search.rel_lo * v, search.rel_hi * v, Scale::log});
    OptimizeOptions opts;
    opts.points_per_decade = search.points_per_decade;
    opts.budget = search.budget;

    std::vector<RcCandidate> evaluated;
    std::mutex mu;
    RcParams best;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int ti = 0; ti < static_cast<int>(grid.times.size()); ++ti) {
        const Matrix& H = s.heats[static_cast<std::size_t>(ti)];
        auto to_params = [&](const std::vector<double>& u) {
            RcParams p;
            p.time_index = ti;
            p.rho = u[0];
            p.sigma_r2 = u[1];
            p.noise_var = search.fix_noise ? search.noise_var : u[2];
            return p;
        };
        Objective f = [&](const std::vector<double>& u) {
            RcParams p = to_params(u);
            double val;
            try {
                val = rc_log_likelihood(s.points, s.blocks, y, H, p);
            } catch (const NumericError&) {
                val = -std::numeric_limits<double>::infinity();
            }
            if (std::isfinite(val)) {
                std::lock_guard<std::mutex> lock(mu);
                evaluated.push_back({p, val});
            }
            return val;
        };
        OptimizeResult r;
        try {
            r = optimize(f, bounds, opts);
        } catch (const OptimizationError&) {
            continue;
        }
        if (r.value > best_val) {
            best_val = r.value;
            best = to_params(r.params);
        }
    }
    if (!std::isfinite(best_val))
        throw FitError("rc-agp: every candidate covariance failed to factorize");
    RcAgpModel m = rc_model(cloud, cover, grid, ids, y, s, best);
    m.evaluated = std::move(evaluated);
    return m;
}

MarginalPrediction predict_rc_agp(const RcAgpModel& model, const IdList& test_ids)
{
    SubsetAssignment a = assign(model.cloud, model.cover, model.centers, test_ids);
    Matrix Xs = model.cloud.rows(test_ids);
    Matrix X = model.cloud.rows(model.train_ids);
    Matrix K_sf = rc_covariance(Xs, a.subset, X, model.train_blocks, model.K_h, model.params.rho,
                                model.params.sigma_r2);
    Vector diag(static_cast<Eigen::Index>(test_ids.size()));
    for (std::size_t k = 0; k < test_ids.size(); ++k)
        diag(static_cast<Eigen::Index>(k)) =
            model.params.sigma_r2 * model.K_h(a.subset[k], a.subset[k]);
    return gp_predict_marginal(model.factor, model.alpha, K_sf, diag);
}

IdList select_inducing(const PointCloud& cloud, const Cover& cover, int m)
{
    if (m < cover.size())
        throw PreconditionError("select_inducing: need at least one inducing point per subset");
    int total_members = 0;
    for (const IdList& s : cover.subsets)
        total_members += static_cast<int>(s.size());
    if (m > cloud.n() || m > total_members)
        throw PreconditionError("select_inducing: more inducing points than cloud points");
    std::vector<char> taken(static_cast<std::size_t>(cloud.n()), 0);
    std::vector<IdList> picks(cover.subsets.size());
    IdList out;
    auto add = [&](int si, int id) {
        taken[static_cast<std::size_t>(id)] = 1;
        picks[static_cast<std::size_t>(si)].push_back(id);
        out.push_back(id);
    };
    for (int si = 0; si < cover.size(); ++si) {
        const IdList& sub = cover.subsets[static_cast<std::size_t>(si)];
        int md = medoid(cloud, sub);
        if (!taken[static_cast<std::size_t>(md)]) {
            add(si, md);
            continue;
        }
        for (int id : sub)
            if (!taken[static_cast<std::size_t>(id)]) {
                add(si, id);
                break;
            }
    }
    int si = 0;
    int stalled = 0;
    while (static_cast<int>(out.size()) < m && stalled < cover.size()) {
        const IdList& sub = cover.subsets[static_cast<std::size_t>(si)];
        int best = -1;
        double best_d = -1.0;
        for (int id : sub) {
            if (taken[static_cast<std::size_t>(id)])
                continue;
            double d = std::numeric_limits<double>::infinity();
            for (int p : picks[static_cast<std::size_t>(si)])
                d = std::min(d, (cloud.points.row(id) - cloud.points.row(p)).squaredNorm());
            if (d > best_d) {
                best_d = d;
                best = id;
            }
        }
        if (best >= 0) {
            add(si, best);
            stalled = 0;
        } else {
            ++stalled;
        }
        si = (si + 1) % cover.size();
    }
    if (static_cast<int>(out.size()) < m)
        throw PreconditionError("select_inducing: subsets too small for the requested count");
    return out;
}

InducingHeat estimate_inducing_heat(const Dynamics& dyn, const PointCloud& cloud, const Cover& cover,
                                    const IdList& inducing, const SAgpConfig& config)
{
    const Atlas& atlas = dyn.atlas();
    if (cover.size() != atlas.size())
        throw PreconditionError("s-agp: cover and atlas sizes differ");
    if (inducing.empty() || config.times.empty())
        throw PreconditionError("s-agp: need inducing points and times");
    IdList centers = medoids(cloud, cover);
    IdList all(static_cast<std::size_t>(cloud.n()));
    for (int k = 0; k < cloud.n(); ++k)
        all[static_cast<std::size_t>(k)] = k;
    SubsetAssignment a = assign(cloud, cover, centers, all);
    std::vector<char> has(static_cast<std::size_t>(cover.size()), 0);
    for (int id : inducing) {
        if (id < 0 || id >= cloud.n())
            throw PreconditionError("s-agp: inducing id outside the cloud");
        has[static_cast<std::size_t>(a.subset[static_cast<std::size_t>(id)])] = 1;
    }
    for (int c = 0; c < cover.size(); ++c)
        if (!has[static_cast<std::size_t>(c)])
            throw PreconditionError("s-agp: chart " + std::to_string(c) + " holds no inducing point");

    std::vector<DensityTarget> targets;
    for (int id = 0; id < cloud.n(); ++id) {
        int c = a.subset[static_cast<std::size_t>(id)];
        const Chart& chart = atlas.charts[static_cast<std::size_t>(c)];
        auto it = std::find(chart.subset_ids.begin(), chart.subset_ids.end(), id);
        if (it == chart.subset_ids.end())
            throw PreconditionError("s-agp: chart " + std::to_string(c) + " was not built from its subset");
        targets.push_back({c, chart.latent.row(it - chart.subset_ids.begin()).transpose()});
    }

    InducingHeat h;
    h.inducing = inducing;
    h.point_charts = a.subset;
    h.times = config.times;
    h.w = config.w > 0.0 ? config.w : default_window(atlas);
    std::vector<int> steps;
    for (double t : h.times)
        steps.push_back(time_to_step(t, config.dt));
    std::vector<Start> starts;
    for (int id : inducing)
        starts.push_back({targets[static_cast<std::size_t>(id)].chart, targets[static_cast<std::size_t>(id)].latent});

    SdeConfig run = dyn.config();
    run.dt = config.dt;
    run.n_paths = static_cast<int>(config.n_paths);
    run.seed = config.seed;
    run.max_rejects = config.max_rejects;
    run.n_steps = *std::max_element(steps.begin(), steps.end());
    run.record_steps = steps;
    std::sort(run.record_steps.begin(), run.record_steps.end());
    run.record_steps.erase(std::unique(run.record_steps.begin(), run.record_steps.end()), run.record_steps.end());
    std::vector<BmPath> paths = simulate_ensemble(dyn, starts, run);

    HitCounter counter(atlas, targets, {h.w});
    const Eigen::Index m = static_cast<Eigen::Index>(inducing.size());
    const std::size_t per = static_cast<std::size_t>(config.n_paths);
    std::vector<Matrix> raw(h.times.size(), Matrix::Zero(m, cloud.n()));
    for (Eigen::Index i = 0; i < m; ++i) {
        auto counts = counter.count_all(paths, static_cast<std::size_t>(i) * per,
                                        static_cast<std::size_t>(i + 1) * per, steps);
        for (std::size_t k = 0; k < h.times.size(); ++k)
            for (int j = 0; j < cloud.n(); ++j)
                raw[k](i, j) = static_cast<double>(counts(static_cast<Eigen::Index>(k), j)) /
                               (static_cast<double>(per) * counter.volume(static_cast<std::size_t>(j)));
    }
    for (std::size_t k = 0; k < h.times.size(); ++k) {
        Matrix uu(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                uu(i, j) = raw[k](i, inducing[static_cast<std::size_t>(j)]);
        Matrix P = symmetrize_project(uu);
        double scale = P.diagonal().mean();
        if (!(scale > 0.0))
            throw GridError("s-agp: inducing heat block has no positive diagonal at t = " +
                            std::to_string(h.times[k]));
        h.uu.push_back(P / scale);
        h.u_all.push_back(raw[k] / scale);
        h.scale.push_back(scale);
    }
    return h;
}

Matrix inducing_cross(const InducingHeat& heat, int time_index, const IdList& ids)
{
    const Matrix& U = heat.u_all[static_cast<std::size_t>(time_index)];
    const Matrix& P = heat.uu[static_cast<std::size_t>(time_index)];
    Matrix out(static_cast<Eigen::Index>(ids.size()), U.rows());
    for (std::size_t a = 0; a < ids.size(); ++a) {
        int id = ids[a];
        if (id < 0 || id >= U.cols())
            throw PreconditionError("s-agp: point id outside the cloud");
        auto it = std::find(heat.inducing.begin(), heat.inducing.end(), id);
        if (it != heat.inducing.end())
            out.row(static_cast<Eigen::Index>(a)) = P.row(it - heat.inducing.begin());
        else
            out.row(static_cast<Eigen::Index>(a)) = U.col(id).transpose();
    }
    return out;
}

namespace {

struct Woodbury {
    Factor uu;
    Factor a;
    Vector b;
    long long ops = 0;
};

Woodbury woodbury(const Matrix& H_uu, const Matrix& H_fu, const Vector& y, double rescale, double noise_var)
{
    if (!(rescale > 0.0) || !(noise_var > 0.0))
        throw PreconditionError("s-agp: rescale and noise must be positive");
    const long long n = H_fu.rows();
    const long long m = H_fu.cols();
    Woodbury w;
    w.uu = factorize(H_uu);
    Matrix Huu = H_uu;
    Huu.diagonal().array() += w.uu.jitter;
    Matrix A = (noise_var / rescale) * Huu;
    A.noalias() += H_fu.transpose() * H_fu;
    w.a = factorize(A);
    w.b = H_fu.transpose() * y;
    w.ops = n * m * m + n * m + 2 * (m * m * m) / 3;
    return w;
}

} // namespace

double sor_log_likelihood(const Matrix& H_uu, const Matrix& H_fu, const Vector& y, double rescale,
                          double noise_var, long long* ops)
{
    if (H_fu.rows() != y.size() || H_fu.cols() != H_uu.rows() || H_uu.rows() != H_uu.cols())
        throw ShapeError("sor_log_likelihood: shape mismatch");
    Woodbury w = woodbury(H_uu, H_fu, y, rescale, noise_var);
    const double n = static_cast<double>(y.size());
    const double m = static_cast<double>(H_uu.rows());
    Vector Ab = w.a.solve(w.b);
    double quad = (y.squaredNorm() - w.b.dot(Ab)) / noise_var;
    double logdet = n * std::log(noise_var) + w.a.log_det() - m * std::log(noise_var / rescale) - w.uu.log_det();
    if (ops)
        *ops = w.ops + static_cast<long long>(m * m);
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * kLog2Pi;
}

void SAgpModel::finalize()
{
    Matrix H_fu = inducing_cross(heat, params.time_index, train_ids);
    Woodbury w = woodbury(heat.uu[static_cast<std::size_t>(params.time_index)], H_fu, y, params.rescale,
                          params.noise_var);
    a_factor = w.a;
    b = w.b;
    ops = w.ops;
}

SAgpModel make_s_agp(const InducingHeat& heat, const IdList& ids, const Vector& y, const SAgpConfig& config,
                     const SAgpParams& params)
{
    if (static_cast<Eigen::Index>(ids.size()) != y.size() || ids.empty())
        throw ShapeError("s-agp: labeled ids and values differ in length");
    if (params.time_index < 0 || params.time_index >= static_cast<int>(heat.times.size()))
        throw PreconditionError("s-agp: time index out of range");
    SAgpModel m;
    m.params = params;
    m.heat = heat;
    m.config = config;
    m.train_ids = ids;
    m.y = y;
    m.finalize();
    Matrix H_fu = inducing_cross(heat, params.time_index, ids);
    m.log_lik = sor_log_likelihood(heat.uu[static_cast<std::size_t>(params.time_index)], H_fu, y,
                                   params.rescale, params.noise_var);
    return m;
}

SAgpModel fit_s_agp(const InducingHeat& heat, const IdList& ids, const Vector& y, const SAgpConfig& config)
{
    if (static_cast<Eigen::Index>(ids.size()) != y.size() || ids.empty())
        throw ShapeError("s-agp: labeled ids and values differ in length");
    if (!y.allFinite())
        throw DataError("labeled values must be finite");
    const SearchConfig& search = config.search;
    const double v = variance_of(y);
    std::vector<Bound> bounds = {{search.rel_lo * v, search.rel_hi * v, Scale::log}};
    if (!search.fix_noise)
        bounds.push_back({search.rel_lo * v, search.rel_hi * v, Scale::log});
    OptimizeOptions opts;
    opts.points_per_decade = search.points_per_decade;
    opts.budget = search.budget;

    SAgpParams best;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int ti = 0; ti < static_cast<int>(heat.times.size()); ++ti) {
        Matrix H_fu = inducing_cross(heat, ti, ids);
        const Matrix& H_uu = heat.uu[static_cast<std::size_t>(ti)];
        auto to_params = [&](const std::vector<double>& u) {
            SAgpParams p;
            p.time_index = ti;
            p.rescale = u[0];
            p.noise_var = search.fix_noise ? search.noise_var : u[1];
            return p;
        };
        Objective f = [&](const std::vector<double>& u) {
            SAgpParams p = to_params(u);
            try {
                return sor_log_likelihood(H_uu, H_fu, y, p.rescale, p.noise_var);
            } catch (const NumericError&) {
                return -std::numeric_limits<double>::infinity();
            }
        };
        OptimizeResult r;
        try {
            r = optimize(f, bounds, opts);
        } catch (const OptimizationError&) {
            continue;
        }
        if (r.value > best_val) {
            best_val = r.value;
            best = to_params(r.params);
        }
    }
    if (!std::isfinite(best_val))
        throw FitError("s-agp: inducing covariance singular at every candidate");
    return make_s_agp(heat, ids, y, config, best);
}

MarginalPrediction predict_s_agp(const SAgpModel& model, const IdList& test_ids)
{
    Matrix H_su = inducing_cross(model.heat, model.params.time_index, test_ids);
    MarginalPrediction out;
    out.mean = H_su * model.a_factor.solve(model.b);
    Matrix S = model.a_factor.solve(Matrix(H_su.transpose()));
    out.var = model.params.noise_var * (H_su.cwiseProduct(S.transpose())).rowwise().sum();
    return out;
}

MarginalPrediction dense_heat_gp(const Matrix& H_ff, const Matrix& H_sf, const Vector& H_ss_diag,
                                 const Vector& y, double rescale, double noise_var)
{
    Matrix K = rescale * H_ff;
    K.diagonal().array() += noise_var;
    Factor f = factorize(K);
    Vector alpha = f.solve(y);
    return gp_predict_marginal(f, alpha, rescale * H_sf, rescale * H_ss_diag);
}

double rmse(const Vector& a, const Vector& b)
{
    if (a.size() != b.size() || a.size() == 0)
        throw ShapeError("rmse: length mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

} // namespace atlasgp
