#include "atlasgp/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atlasgp {

double standard_error(long n_hits, long n, double volume)
{
    if (n <= 0 || !(volume > 0.0))
        return 0.0;
    double p = static_cast<double>(n_hits) / static_cast<double>(n);
    return std::sqrt(static_cast<double>(n) * p * (1.0 - p)) / (volume * static_cast<double>(n));
}

namespace {

MetricTensor target_metric(const Chart& chart, const Vector& x)
{
    if (chart.kind == ChartKind::identity)
        return metric_from(Matrix::Identity(chart.q(), chart.q()));
    return chart.expected_metric(x);
}

const Chart& chart_at(const Atlas& atlas, int c)
{
    if (c < 0 || c >= atlas.size())
        throw PreconditionError("density target chart out of range");
    return atlas.charts[static_cast<std::size_t>(c)];
}

} // namespace

double window_volume(const Atlas& atlas, const DensityTarget& target, double w)
{
    if (!(w > 0.0))
        throw PreconditionError("window half-width must be positive");
    const Chart& chart = chart_at(atlas, target.chart);
    MetricTensor m = target_metric(chart, target.latent);
    return std::pow(2.0 * w, chart.q()) * std::sqrt(m.det_G);
}

HitCounter::HitCounter(const Atlas& atlas, std::vector<DensityTarget> targets, const NeighborhoodSpec& spec)
    : atlas_(&atlas), targets_(std::move(targets)), spec_(spec)
{
    if (!(spec_.w > 0.0))
        throw PreconditionError("window half-width must be positive");
    by_chart_.assign(static_cast<std::size_t>(atlas.size()), {});
    for (std::size_t t = 0; t < targets_.size(); ++t) {
        DensityTarget& tg = targets_[t];
        const Chart& chart = chart_at(atlas, tg.chart);
        if (tg.latent.size() != chart.q())
            throw ShapeError("density target latent has wrong dimension");
        tg.latent = chart.canonical(tg.latent);
        MetricTensor m = target_metric(chart, tg.latent);
        volumes_.push_back(std::pow(2.0 * spec_.w, chart.q()) * std::sqrt(m.det_G));
        target_ambient_.push_back(chart.forward_mean(tg.latent));
        Eigen::SelfAdjointEigenSolver<Matrix> es(m.G, Eigen::EigenvaluesOnly);
        double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
        reach_.push_back(2.0 * spec_.w * std::sqrt(chart.q() * lmax) * 1.5 + 1e-9);
        by_chart_[static_cast<std::size_t>(tg.chart)].push_back(static_cast<int>(t));
    }
}

bool HitCounter::inside_window(const Chart& chart, const Vector& x, const DensityTarget& target) const
{
    Vector d = chart.latent_delta(x, target.latent);
    return (d.array().abs() <= spec_.w).all();
}

void HitCounter::count(const BmPath& path, const std::vector<int>& steps,
                       Eigen::Matrix<long, -1, -1>& counts) const
{
    BackwardOptions fast;
    fast.full_likelihood = false;
    const Atlas& atlas = *atlas_;
    for (std::size_t si = 0; si < steps.size(); ++si) {
        const PathStep* ps = path.at(steps[si]);
        if (!ps)
            throw PreconditionError("hit counting: step " + std::to_string(steps[si]) + " was not recorded");
        const int c = ps->chart;
        for (int t : by_chart_[static_cast<std::size_t>(c)])
            if (inside_window(atlas.charts[static_cast<std::size_t>(c)], ps->latent,
                              targets_[static_cast<std::size_t>(t)]))
                ++counts(static_cast<Eigen::Index>(si), t);
        for (int j = 0; j < atlas.size(); ++j) {
            const IdList& tj = by_chart_[static_cast<std::size_t>(j)];
            if (j == c || tj.empty() || !atlas.adjacent(c, j))
                continue;
            const Chart& cj = atlas.charts[static_cast<std::size_t>(j)];
            bool mapped = false;
            bool usable = false;
            Vector xj;
            for (int t : tj) {
                if ((ps->ambient - target_ambient_[static_cast<std::size_t>(t)]).norm() >
                    reach_[static_cast<std::size_t>(t)])
                    continue;
                if (!mapped) {
                    mapped = true;
                    try {
                        xj = cj.canonical(cj.backward(ps->ambient, fast));
                        usable = cj.in_boundary(xj);
                    } catch (const BackwardMapError&) {
                        usable = false;
                    }
                }
                if (!usable)
                    break;
                if (inside_window(cj, xj, targets_[static_cast<std::size_t>(t)]))
                    ++counts(static_cast<Eigen::Index>(si), t);
            }
        }
    }
}

namespace {

Eigen::Matrix<long, -1, -1> count_range(const HitCounter& counter, const std::vector<BmPath>& paths,
                                        std::size_t begin, std::size_t end, const std::vector<int>& steps,
                                        bool parallel)
{
    if (begin > end || end > paths.size())
        throw PreconditionError("count_all: path range out of bounds");
    for (std::size_t k = begin; k < end; ++k)
        for (int s : steps)
            if (!paths[k].at(s))
                throw PreconditionError("hit counting: step " + std::to_string(s) + " was not recorded");
    const Eigen::Index ns = static_cast<Eigen::Index>(steps.size());
    const Eigen::Index nt = static_cast<Eigen::Index>(counter.targets().size());
    Eigen::Matrix<long, -1, -1> total = Eigen::Matrix<long, -1, -1>::Zero(ns, nt);
#pragma omp parallel if (parallel)
    {
        Eigen::Matrix<long, -1, -1> local = Eigen::Matrix<long, -1, -1>::Zero(ns, nt);
#pragma omp for schedule(dynamic, 32)
        for (long k = static_cast<long>(begin); k < static_cast<long>(end); ++k)
            counter.count(paths[static_cast<std::size_t>(k)], steps, local);
#pragma omp critical
        total += local;
    }
    return total;
}

} // namespace

Eigen::Matrix<long, -1, -1> HitCounter::count_all(const std::vector<BmPath>& paths, std::size_t begin,
                                                  std::size_t end, const std::vector<int>& steps) const
{
    return count_range(*this, paths, begin, end, steps, true);
}

namespace serial {

Eigen::Matrix<long, -1, -1> count_all(const HitCounter& counter, const std::vector<BmPath>& paths,
                                      std::size_t begin, std::size_t end, const std::vector<int>& steps)
{
    return count_range(counter, paths, begin, end, steps, false);
}

} // namespace serial

DensityEstimate estimate_density(const Atlas& atlas, const std::vector<BmPath>& paths, int step,
                                 const DensityTarget& target, const NeighborhoodSpec& spec)
{
    HitCounter counter(atlas, {target}, spec);
    auto counts = counter.count_all(paths, 0, paths.size(), {step});
    DensityEstimate e;
    e.hits = counts(0, 0);
    e.n = static_cast<long>(paths.size());
    e.volume = counter.volume(0);
    e.value = e.n > 0 ? static_cast<double>(e.hits) / (static_cast<double>(e.n) * e.volume) : 0.0;
    e.se = standard_error(e.hits, e.n, e.volume);
    return e;
}

std::vector<DensityEstimate> estimate_profile(const Dynamics& dyn, const Start& start,
                                              const std::vector<DensityTarget>& targets, int step,
                                              const NeighborhoodSpec& spec, const SdeConfig& run)
{
    SdeConfig cfg = run;
    cfg.n_steps = std::max(step, 1);
    cfg.record_steps = {step};
    std::vector<BmPath> paths = simulate_ensemble(dyn, {start}, cfg);
    HitCounter counter(dyn.atlas(), targets, spec);
    auto counts = counter.count_all(paths, 0, paths.size(), {step});
    std::vector<DensityEstimate> out;
    const long n = static_cast<long>(paths.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        DensityEstimate e;
        e.hits = counts(0, static_cast<Eigen::Index>(t));
        e.n = n;
        e.volume = counter.volume(t);
        e.value = static_cast<double>(e.hits) / (static_cast<double>(n) * e.volume);
        e.se = standard_error(e.hits, n, e.volume);
        out.push_back(e);
    }
    return out;
}

double default_window(const Atlas& atlas)
{
    std::vector<double> nn;
    int q = 1;
    for (const Chart& chart : atlas.charts) {
        q = chart.q();
        for (int i = 0; i < chart.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < chart.size(); ++j)
                if (j != i) {
                    Vector d = chart.latent_delta(chart.latent.row(i).transpose(), chart.latent.row(j).transpose());
                    best = std::min(best, d.norm());
                }
            if (std::isfinite(best))
                nn.push_back(best);
        }
    }
    if (nn.empty())
        throw PreconditionError("default_window: atlas has no spacing information");
    std::nth_element(nn.begin(), nn.begin() + static_cast<long>(nn.size() / 2), nn.end());
    return 0.1 * nn[nn.size() / 2] * std::sqrt(static_cast<double>(q));
}

int HeatKernelGrid::time_index(double t) const
{
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return static_cast<int>(k);
    throw GridError("time " + std::to_string(t) + " is not on the grid");
}

int time_to_step(double t, double dt)
{
    if (!(t > 0.0) || !(dt > 0.0))
        throw PreconditionError("time_to_step: t and dt must be positive");
    double r = t / dt;
    double k = std::round(r);
    if (std::abs(r - k) > 1e-6 * std::max(1.0, r))
        throw PreconditionError("time " + std::to_string(t) + " is not a multiple of dt");
    return static_cast<int>(k);
}

Matrix symmetrize_project(const Matrix& raw)
{
    if (raw.rows() != raw.cols())
        throw ShapeError("symmetrize_project: matrix must be square");
    return psd_project(raw);
}

HeatKernelGrid build_grid(const Dynamics& dyn, const PointCloud& cloud, const Cover& cover,
                          const GridConfig& config)
{
    const Atlas& atlas = dyn.atlas();
    if (cover.size() != atlas.size())
        throw PreconditionError("build_grid: cover and atlas sizes differ");
    if (config.times.empty() || config.n_paths < 1)
        throw PreconditionError("build_grid: need at least one time and one path");
    HeatKernelGrid g;
    g.times = config.times;
    g.dt = config.dt;
    g.seed = config.seed;
    g.n_paths = config.n_paths;
    g.w = config.w > 0.0 ? config.w : default_window(atlas);
    for (double t : g.times)
        g.steps.push_back(time_to_step(t, g.dt));
    std::vector<Start> starts;
    for (int i = 0; i < cover.size(); ++i) {
        int m = medoid(cloud, cover.subsets[static_cast<std::size_t>(i)]);
        const Chart& chart = atlas.charts[static_cast<std::size_t>(i)];
        auto it = std::find(chart.subset_ids.begin(), chart.subset_ids.end(), m);
        if (it == chart.subset_ids.end())
            throw PreconditionError("build_grid: chart " + std::to_string(i) + " does not hold its subset medoid");
        int row = static_cast<int>(it - chart.subset_ids.begin());
        g.centers.push_back(m);
        g.center_targets.push_back({i, chart.latent.row(row).transpose()});
        starts.push_back({i, chart.latent.row(row).transpose()});
    }
    SdeConfig run = dyn.config();
    run.dt = g.dt;
    run.n_paths = static_cast<int>(config.n_paths);
    run.seed = config.seed;
    run.max_rejects = config.max_rejects;
    run.n_steps = *std::max_element(g.steps.begin(), g.steps.end());
    run.record_steps = g.steps;
    std::sort(run.record_steps.begin(), run.record_steps.end());
    run.record_steps.erase(std::unique(run.record_steps.begin(), run.record_steps.end()), run.record_steps.end());
    std::vector<BmPath> paths = simulate_ensemble(dyn, starts, run);

    HitCounter counter(atlas, g.center_targets, {g.w});
    const int nc = g.size();
    for (std::size_t k = 0; k < g.times.size(); ++k)
        g.raw.push_back(Matrix::Zero(nc, nc));
    const std::size_t per = static_cast<std::size_t>(config.n_paths);
    for (int i = 0; i < nc; ++i) {
        auto counts = counter.count_all(paths, static_cast<std::size_t>(i) * per,
                                        static_cast<std::size_t>(i + 1) * per, g.steps);
        for (std::size_t k = 0; k < g.times.size(); ++k)
            for (int j = 0; j < nc; ++j)
                g.raw[k](i, j) = static_cast<double>(counts(static_cast<Eigen::Index>(k), j)) /
                                 (static_cast<double>(per) * counter.volume(static_cast<std::size_t>(j)));
    }
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        for (int i = 0; i < nc; ++i)
            if (!(g.raw[k](i, i) > 0.0))
                throw GridError("heat kernel grid: zero diagonal at center " + std::to_string(i) + ", t = " +
                                std::to_string(g.times[k]) + "; increase n_paths or the window");
        g.projected.push_back(symmetrize_project(g.raw[k]));
    }
    return g;
}

} // namespace atlasgp
