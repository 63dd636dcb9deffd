#include "atlasgp/bm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace atlasgp {

void SdeConfig::validate() const
{
    if (!(dt > 0.0) || n_steps < 1 || n_paths < 1 || max_rejects < 1 || !(fd_step_rel > 0.0))
        throw PreconditionError("sde config requires dt > 0, n_steps >= 1, n_paths >= 1, "
                                "max_rejects >= 1, fd_step > 0");
    for (int s : record_steps)
        if (s < 0 || s > n_steps)
            throw PreconditionError("sde config: record step " + std::to_string(s) + " out of range");
}

const PathStep* BmPath::at(int step) const
{
    auto it = std::lower_bound(steps.begin(), steps.end(), step,
                               [](const PathStep& p, int s) { return p.step < s; });
    if (it == steps.end() || it->step != step)
        return nullptr;
    return &*it;
}

namespace {

Matrix density_weighted_inverse(const Chart& chart, const Vector& x, bool& ok)
{
    MetricTensor m = chart.expected_metric(x);
    Matrix F = m.inv_G * std::sqrt(m.det_G);
    ok = F.allFinite() && m.det_G > 0.0;
    return F;
}

} // namespace

Vector drift(const Chart& chart, const Vector& x, double fd_step)
{
    const int q = chart.q();
    switch (chart.kind) {
    case ChartKind::identity:
    case ChartKind::analytic_circle:
        return Vector::Zero(q);
    case ChartKind::analytic_torus: {
        Vector d = Vector::Zero(2);
        d(0) = -0.5 * std::sin(x(0)) / (chart.analytic.r * (chart.analytic.R + chart.analytic.r * std::cos(x(0))));
        return d;
    }
    case ChartKind::gplvm:
        break;
    }
    if (!(fd_step > 0.0))
        throw PreconditionError("drift: fd_step must be positive");
    bool ok0 = false;
    Matrix F0 = density_weighted_inverse(chart, x, ok0);
    MetricTensor m0 = chart.expected_metric(x);
    Vector out = Vector::Zero(q);
    for (int r = 0; r < q; ++r) {
        Vector xp = x, xm = x;
        xp(r) += fd_step;
        xm(r) -= fd_step;
        bool okp = false, okm = false;
        Matrix Fp = density_weighted_inverse(chart, xp, okp);
        Matrix Fm = density_weighted_inverse(chart, xm, okm);
        Vector col;
        if (okp && okm)
            col = (Fp.col(r) - Fm.col(r)) / (2.0 * fd_step);
        else if (okp && ok0)
            col = (Fp.col(r) - F0.col(r)) / fd_step;
        else if (okm && ok0)
            col = (F0.col(r) - Fm.col(r)) / fd_step;
        else
            throw DriftError("drift: metric evaluation failed on both sides");
        out += col;
    }
    return 0.5 * out / std::sqrt(m0.det_G);
}

Vector step(const Chart& chart, const Vector& x, double dt, Rng& rng, double fd_step)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector z(chart.q());
    for (int c = 0; c < chart.q(); ++c)
        z(c) = nd(rng);
    Vector d = drift(chart, x, fd_step);
    Matrix S = chart.expected_metric(x).inv_sqrt_G;
    return chart.canonical(x + d * dt + std::sqrt(dt) * S * z);
}

ChartField::ChartField(const Chart& chart, double fd_step, bool use_cache, int resolution)
    : chart_(&chart), fd_step_(fd_step), q_(chart.q())
{
    if (!use_cache || chart.kind != ChartKind::gplvm)
        return;
    if (q_ > 3)
        return;
    res_ = resolution > 0 ? resolution : (q_ == 1 ? 400 : (q_ == 2 ? 64 : 24));
    res_ = std::max(res_, 4);
    const double ell = 1.0 / std::sqrt(chart.params.rho);
    Vector bmin = chart.latent.colwise().minCoeff().transpose();
    Vector bmax = chart.latent.colwise().maxCoeff().transpose();

    long n_nodes = 1;
    for (int c = 0; c < q_; ++c)
        n_nodes *= res_;
    auto node_coord = [&](long idx, Vector& x) {
        for (int c = 0; c < q_; ++c) {
            long k = idx % res_;
            idx /= res_;
            x(c) = lo_(c) + step_(c) * static_cast<double>(k);
        }
    };
    auto on_border = [&](long idx) {
        for (int c = 0; c < q_; ++c) {
            long k = idx % res_;
            idx /= res_;
            if (k == 0 || k == res_ - 1)
                return true;
        }
        return false;
    };

    double margin = 0.5 * ell;
    for (int attempt = 0; attempt < 12; ++attempt) {
        lo_ = bmin.array() - margin;
        Vector hi = bmax.array() + margin;
        step_ = (hi - lo_) / static_cast<double>(res_ - 1);
        bool closed = true;
        Vector x(q_);
        for (long idx = 0; idx < n_nodes && closed; ++idx) {
            if (!on_border(idx))
                continue;
            node_coord(idx, x);
            if (chart.forward_var(x) <= chart.boundary_var_threshold)
                closed = false;
        }
        if (closed)
            break;
        margin += 0.5 * ell;
    }

    stride_ = 1 + q_ + q_ * q_;
    values_.assign(static_cast<std::size_t>(n_nodes * stride_), 0.0);
    std::vector<std::exception_ptr> errors(1);
#pragma omp parallel for schedule(dynamic, 64)
    for (long idx = 0; idx < n_nodes; ++idx) {
        try {
            Vector x(q_);
            node_coord(idx, x);
            LocalField f = direct(x);
            double* v = &values_[static_cast<std::size_t>(idx * stride_)];
            v[0] = chart.forward_var(x);
            for (int c = 0; c < q_; ++c)
                v[1 + c] = f.drift(c);
            for (int a = 0; a < q_; ++a)
                for (int b = 0; b < q_; ++b)
                    v[1 + q_ + a * q_ + b] = f.inv_sqrt_G(a, b);
        } catch (...) {
#pragma omp critical
            errors[0] = std::current_exception();
        }
    }
    if (errors[0])
        std::rethrow_exception(errors[0]);
    cached_ = true;
}

LocalField ChartField::direct(const Vector& x) const
{
    LocalField f;
    const Chart& c = *chart_;
    f.inside = c.in_boundary(x);
    f.drift = drift(c, x, fd_step_);
    f.inv_sqrt_G = c.expected_metric(x).inv_sqrt_G;
    return f;
}

bool ChartField::locate(const Vector& x, std::vector<int>& base, std::vector<double>& frac) const
{
    base.resize(static_cast<std::size_t>(q_));
    frac.resize(static_cast<std::size_t>(q_));
    for (int c = 0; c < q_; ++c) {
        double u = (x(c) - lo_(c)) / step_(c);
        if (!(u >= 0.0) || !(u <= res_ - 1))
            return false;
        int k = std::min(static_cast<int>(u), res_ - 2);
        base[static_cast<std::size_t>(c)] = k;
        frac[static_cast<std::size_t>(c)] = u - k;
    }
    return true;
}

LocalField ChartField::eval(const Vector& x) const
{
    if (!cached_)
        return direct(x);
    LocalField f;
    f.drift = Vector::Zero(q_);
    f.inv_sqrt_G = Matrix::Zero(q_, q_);
    thread_local std::vector<int> base;
    thread_local std::vector<double> frac;
    if (!locate(x, base, frac)) {
        f.inside = false;
        f.inv_sqrt_G = chart_->expected_metric(x).inv_sqrt_G;
        return f;
    }
    double var = 0.0;
    const int corners = 1 << q_;
    for (int m = 0; m < corners; ++m) {
        double w = 1.0;
        long idx = 0;
        long mult = 1;
        for (int c = 0; c < q_; ++c) {
            int bit = (m >> c) & 1;
            double fc = frac[static_cast<std::size_t>(c)];
            w *= bit ? fc : 1.0 - fc;
            idx += (base[static_cast<std::size_t>(c)] + bit) * mult;
            mult *= res_;
        }
        if (w == 0.0)
            continue;
        const double* v = &values_[static_cast<std::size_t>(idx * stride_)];
        var += w * v[0];
        for (int c = 0; c < q_; ++c)
            f.drift(c) += w * v[1 + c];
        for (int a = 0; a < q_; ++a)
            for (int b = 0; b < q_; ++b)
                f.inv_sqrt_G(a, b) += w * v[1 + q_ + a * q_ + b];
    }
    f.inside = var <= chart_->boundary_var_threshold;
    return f;
}

bool ChartField::in_boundary(const Vector& x) const
{
    if (!cached_)
        return chart_->in_boundary(x);
    thread_local std::vector<int> base;
    thread_local std::vector<double> frac;
    if (!locate(x, base, frac))
        return false;
    double var = 0.0;
    const int corners = 1 << q_;
    for (int m = 0; m < corners; ++m) {
        double w = 1.0;
        long idx = 0;
        long mult = 1;
        for (int c = 0; c < q_; ++c) {
            int bit = (m >> c) & 1;
            double fc = frac[static_cast<std::size_t>(c)];
            w *= bit ? fc : 1.0 - fc;
            idx += (base[static_cast<std::size_t>(c)] + bit) * mult;
            mult *= res_;
        }
        var += w * values_[static_cast<std::size_t>(idx * stride_)];
    }
    return var <= chart_->boundary_var_threshold;
}

Dynamics::Dynamics(const Atlas& atlas, const SdeConfig& config) : atlas_(&atlas), config_(config)
{
    config_.validate();
    fields_.reserve(atlas.charts.size());
    for (const Chart& c : atlas.charts)
        fields_.emplace_back(c, config_.fd_step_rel * c.latent_scale(), config_.use_field_cache,
                             config_.field_resolution);
}

namespace {

double spectral_norm(const Matrix& J)
{
    Eigen::JacobiSVD<Matrix> svd(J);
    return svd.singularValues()(0);
}

} // namespace

BmPath simulate_path(const Dynamics& dyn, const Start& start, Rng& rng)
{
    return simulate_path(dyn, start, rng, dyn.config());
}

BmPath simulate_path(const Dynamics& dyn, const Start& start, Rng& rng, const SdeConfig& cfg)
{
    const Atlas& atlas = dyn.atlas();
    if (start.chart < 0 || start.chart >= atlas.size())
        throw PreconditionError("simulate_path: start chart out of range");
    int c = start.chart;
    Vector x = atlas.charts[static_cast<std::size_t>(c)].canonical(start.latent);
    if (!dyn.field(c).in_boundary(x))
        throw PreconditionError("simulate_path: start lies outside its chart boundary");

    std::vector<char> record(static_cast<std::size_t>(cfg.n_steps + 1), cfg.record_steps.empty() ? 1 : 0);
    for (int s : cfg.record_steps)
        record[static_cast<std::size_t>(s)] = 1;
    const bool record_all = cfg.record_steps.empty();

    BmPath path;
    if (record[0])
        path.steps.push_back({0, c, x, atlas.charts[static_cast<std::size_t>(c)].forward_mean(x), 0});

    std::normal_distribution<double> nd(0.0, 1.0);
    const double sdt = std::sqrt(cfg.dt);
    BackwardOptions fast;
    fast.full_likelihood = false;
    const int q = atlas.charts[static_cast<std::size_t>(c)].q();
    Vector z(q);
    Vector prev_ambient;
    if (record_all)
        prev_ambient = atlas.charts[static_cast<std::size_t>(c)].forward_mean(x);

    for (int tau = 1; tau <= cfg.n_steps; ++tau) {
        std::uint8_t flags = 0;
        const Chart& chart = atlas.charts[static_cast<std::size_t>(c)];
        const ChartField& field = dyn.field(c);
        LocalField lf = field.eval(x);
        bool accepted = false;
        int c_new = c;
        Vector xn;
        IdList exits;
        bool exits_known = false;
        for (int attempt = 0; attempt < cfg.max_rejects && !accepted; ++attempt) {
            for (int k = 0; k < q; ++k)
                z(k) = nd(rng);
            xn = chart.canonical(x + lf.drift * cfg.dt + sdt * (lf.inv_sqrt_G * z));
            if (field.in_boundary(xn)) {
                accepted = true;
                break;
            }
            // A proposal leaving this chart is kept when an overlapping chart contains it.
            if (!exits_known) {
                exits = atlas.overlap_targets(c, x);
                exits_known = true;
            }
            if (exits.empty())
                continue;
            Vector sn = chart.forward_mean(xn);
            for (int j : exits) {
                const Chart& cj = atlas.charts[static_cast<std::size_t>(j)];
                try {
                    Vector xj = cj.canonical(cj.backward(sn, fast));
                    if (dyn.field(j).in_boundary(xj)) {
                        xn = xj;
                        c_new = j;
                        accepted = true;
                        ++path.transitions;
                        break;
                    }
                } catch (const BackwardMapError&) {
                }
            }
        }
        Vector x_prev = x;
        int c_prev = c;
        if (accepted) {
            x = xn;
            c = c_new;
        } else {
            flags |= flag_reject_exhausted;
            ++path.reject_exhaustions;
        }

        IdList targets = atlas.overlap_targets(c, x);
        if (!targets.empty()) {
            std::uniform_int_distribution<int> pick(0, static_cast<int>(targets.size()) - 1);
            int j = targets[static_cast<std::size_t>(pick(rng))];
            const Chart& ci = atlas.charts[static_cast<std::size_t>(c)];
            const Chart& cj = atlas.charts[static_cast<std::size_t>(j)];
            bool moved = false;
            try {
                Vector xj = cj.canonical(cj.backward(ci.forward_mean(x), fast));
                if (dyn.field(j).in_boundary(xj)) {
                    c = j;
                    x = xj;
                    moved = true;
                    ++path.transitions;
                }
            } catch (const BackwardMapError&) {
            }
            if (!moved) {
                flags |= flag_transition_failed;
                ++path.transition_failures;
            }
        }

        if (record[static_cast<std::size_t>(tau)]) {
            Vector amb = atlas.charts[static_cast<std::size_t>(c)].forward_mean(x);
            if (record_all) {
                const Chart& cp = atlas.charts[static_cast<std::size_t>(c_prev)];
                if (cp.kind != ChartKind::identity) {
                    MetricTensor m = cp.expected_metric(x_prev);
                    Eigen::SelfAdjointEigenSolver<Matrix> es(m.inv_G, Eigen::EigenvaluesOnly);
                    double bound = 6.0 * std::sqrt(cfg.dt * es.eigenvalues().maxCoeff()) *
                                   spectral_norm(cp.jacobian_mean(x_prev));
                    if ((amb - prev_ambient).norm() > bound)
                        flags |= flag_displacement_bound;
                }
                prev_ambient = amb;
            }
            path.steps.push_back({tau, c, x, std::move(amb), flags});
        }
    }
    return path;
}

namespace {

std::vector<BmPath> run_ensemble(const Dynamics& dyn, const std::vector<Start>& starts,
                                 const SdeConfig& run, bool parallel)
{
    run.validate();
    const long per = run.n_paths;
    const long total = per * static_cast<long>(starts.size());
    std::vector<BmPath> out(static_cast<std::size_t>(total));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (long k = 0; k < total; ++k) {
        long s = k / per;
        long p = k % per;
        try {
            Rng rng = make_rng(run.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(p));
            out[static_cast<std::size_t>(k)] = simulate_path(dyn, starts[static_cast<std::size_t>(s)], rng, run);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

} // namespace

std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts,
                                      const SdeConfig& run)
{
    return run_ensemble(dyn, starts, run, true);
}

std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts)
{
    return run_ensemble(dyn, starts, dyn.config(), true);
}

namespace serial {

std::vector<BmPath> simulate_ensemble(const Dynamics& dyn, const std::vector<Start>& starts,
                                      const SdeConfig& run)
{
    return run_ensemble(dyn, starts, run, false);
}

} // namespace serial

EnsembleStats ensemble_stats(const std::vector<BmPath>& paths, const SdeConfig& config)
{
    EnsembleStats s;
    for (const BmPath& p : paths) {
        s.steps += config.n_steps;
        s.reject_exhaustions += p.reject_exhaustions;
        s.transition_failures += p.transition_failures;
        s.transitions += p.transitions;
    }
    return s;
}

} // namespace atlasgp
