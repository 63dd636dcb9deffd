#include "benchmark_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>

namespace atlasgp::suite {

Cover torus_cover(const TorusFixture& fx, int overlap_k, int n_ring, int n_tube)
{
    return grow_partition(fx.cloud, torus_partition(fx.angles, n_ring, n_tube), overlap_k);
}

Fixture torus_benchmark(int overlap_k)
{
    TorusFixture t = torus_fixture();
    Fixture fx;
    fx.name = "torus";
    fx.cloud = t.cloud;
    fx.truth.resize(t.cloud.n());
    for (int i = 0; i < t.cloud.n(); ++i)
        fx.truth(i) = torus_f(t.angles(i, 0), t.angles(i, 1));
    fx.cover = torus_cover(t, overlap_k);
    fx.q = 2;
    fx.kind = AtlasKind::gplvm;
    return fx;
}

Fixture ushape_benchmark(int overlap_k)
{
    UShapeFixture u = ushape_fixture();
    Fixture fx;
    fx.name = "ushape";
    fx.cloud = u.cloud;
    fx.truth = u.f;
    fx.cover = grow_partition(u.cloud, ushape_partition(u.cloud), overlap_k);
    fx.q = 2;
    fx.kind = AtlasKind::identity;
    return fx;
}

BenchConfig default_config(const std::string& suite)
{
    BenchConfig c;
    c.suite = suite;
    if (suite == "torus") {
        c.times = {0.5, 1.0, 2.0, 4.0};
        c.w = 0.3;
        c.methods = {"rc-agp", "euclid", "gl", "s-agp"};
        c.inducing = {8, 16};
    } else if (suite == "ushape") {
        c.times = {0.25, 0.5, 1.0, 2.0, 4.0};
        c.w = 0.1;
        c.methods = {"rc-agp", "euclid", "gl"};
    } else {
        throw PreconditionError("unknown suite '" + suite + "'; expected torus or ushape");
    }
    return c;
}

Json config_json(const BenchConfig& c)
{
    Json j;
    j["suite"] = c.suite;
    j["snr_db"] = c.snr_db;
    j["replicates"] = c.replicates;
    j["seed"] = c.seed;
    j["n_labeled"] = c.n_labeled;
    j["overlap_k"] = c.overlap_k;
    j["n_paths"] = c.n_paths;
    j["dt"] = c.dt;
    j["times"] = c.times;
    j["w"] = c.w;
    j["methods"] = c.methods;
    j["inducing"] = c.inducing;
    j["gl"] = {{"k_neighbors", c.gl.k_neighbors}, {"n_eigs", c.gl.n_eigs}, {"bandwidth", c.gl.bandwidth}};
    return j;
}

Replicate make_replicate(const Fixture& fx, int n_labeled, double snr_db, std::uint64_t seed, int rep)
{
    const int n = fx.cloud.n();
    if (n_labeled < 1 || n_labeled > n)
        throw PreconditionError("labeled count must lie in [1, n]");
    Rng rng = make_rng(seed, 0x6c61, static_cast<std::uint64_t>(rep));
    IdList all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < n_labeled; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    Replicate r;
    r.ids.assign(all.begin(), all.begin() + n_labeled);
    std::sort(r.ids.begin(), r.ids.end());
    Vector clean(n_labeled);
    for (int i = 0; i < n_labeled; ++i)
        clean(i) = fx.truth(r.ids[static_cast<std::size_t>(i)]);
    // Noise variance follows the signal variance over the whole fixture.
    Vector noisy = add_noise(fx.truth, snr_db, derive_seed(seed, 0x6e73, static_cast<std::uint64_t>(rep)));
    r.y.resize(n_labeled);
    for (int i = 0; i < n_labeled; ++i)
        r.y(i) = noisy(r.ids[static_cast<std::size_t>(i)]);
    return r;
}

double MethodRmse::mean() const
{
    if (rmse.empty())
        return 0.0;
    return std::accumulate(rmse.begin(), rmse.end(), 0.0) / static_cast<double>(rmse.size());
}

double MethodRmse::sd() const
{
    if (rmse.size() < 2)
        return 0.0;
    double m = mean();
    double s = 0.0;
    for (double v : rmse)
        s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(rmse.size() - 1));
}

const MethodRmse& BenchResult::method(const std::string& name) const
{
    for (const MethodRmse& m : methods)
        if (m.method == name)
            return m;
    throw PreconditionError("no results for method '" + name + "'");
}

BenchResult run_benchmark(const BenchConfig& config, std::ostream* log)
{
    auto t0 = std::chrono::steady_clock::now();
    Fixture fx = config.suite == "torus" ? torus_benchmark(config.overlap_k) : ushape_benchmark(config.overlap_k);
    const int n = fx.cloud.n();
    IdList all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);

    auto wants = [&](const std::string& m) {
        return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
    };
    const bool need_atlas = wants("rc-agp") || wants("s-agp");

    AtlasConfig ac;
    ac.kind = fx.kind;
    ac.gplvm.seed = config.seed;
    std::unique_ptr<Atlas> atlas;
    std::unique_ptr<Dynamics> dyn;
    HeatKernelGrid grid;
    std::vector<InducingHeat> inducing;
    if (need_atlas) {
        atlas = std::make_unique<Atlas>(build_atlas(fx.cloud, fx.cover, fx.q, ac));
        SdeConfig sc;
        sc.dt = config.dt;
        dyn = std::make_unique<Dynamics>(*atlas, sc);
        if (log)
            *log << "atlas: " << atlas->size() << " charts\n";
    }
    if (wants("rc-agp")) {
        GridConfig gc;
        gc.n_paths = config.n_paths;
        gc.dt = config.dt;
        gc.times = config.times;
        gc.w = config.w;
        gc.seed = derive_seed(config.seed, 0x6772);
        grid = build_grid(*dyn, fx.cloud, fx.cover, gc);
        if (log)
            *log << "grid: " << grid.size() << " centers, w = " << grid.w << "\n";
    }
    SAgpConfig sconf;
    sconf.n_paths = config.n_paths;
    sconf.dt = config.dt;
    sconf.times = config.times;
    sconf.w = config.w;
    sconf.seed = derive_seed(config.seed, 0x7361);
    sconf.search = config.search;
    if (wants("s-agp"))
        for (int m : config.inducing) {
            IdList ids = select_inducing(fx.cloud, fx.cover, m);
            inducing.push_back(estimate_inducing_heat(*dyn, fx.cloud, fx.cover, ids, sconf));
        }
    std::unique_ptr<GlSpectrum> spectrum;

    BenchResult result;
    auto slot = [&](const std::string& name) -> MethodRmse& {
        for (MethodRmse& m : result.methods)
            if (m.method == name)
                return m;
        result.methods.push_back({name, {}});
        return result.methods.back();
    };
    for (const std::string& m : config.methods) {
        if (m == "s-agp") {
            for (int k : config.inducing)
                slot("s-agp-" + std::to_string(k));
        } else if (m == "rc-agp" || m == "euclid" || m == "gl") {
            slot(m);
        } else {
            throw PreconditionError("unknown method '" + m + "'");
        }
    }

    for (int rep = 0; rep < config.replicates; ++rep) {
        Replicate r = make_replicate(fx, config.n_labeled, config.snr_db, config.seed, rep);
        if (wants("rc-agp")) {
            RcAgpModel model = fit_rc_agp(fx.cloud, fx.cover, grid, r.ids, r.y, config.search);
            slot("rc-agp").rmse.push_back(rmse(predict_rc_agp(model, all).mean, fx.truth));
        }
        if (wants("euclid")) {
            EuclideanGp model = fit_euclidean_gp(fx.cloud.rows(r.ids), r.y, config.search);
            slot("euclid").rmse.push_back(rmse(predict_euclidean_gp(model, fx.cloud.points).mean, fx.truth));
        }
        if (wants("gl")) {
            GlGp model = fit_gl_gp(fx.cloud, r.ids, r.y, config.gl, config.search);
            slot("gl").rmse.push_back(rmse(predict_gl_gp(model, all).mean, fx.truth));
        }
        if (wants("s-agp"))
            for (std::size_t k = 0; k < inducing.size(); ++k) {
                SAgpModel model = fit_s_agp(inducing[k], r.ids, r.y, sconf);
                slot("s-agp-" + std::to_string(config.inducing[k]))
                    .rmse.push_back(rmse(predict_s_agp(model, all).mean, fx.truth));
            }
        if (log) {
            *log << "replicate " << rep;
            for (const MethodRmse& m : result.methods)
                *log << "  " << m.method << " " << m.rmse.back();
            *log << "\n";
        }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

void write_results_csv(const std::string& path, const BenchResult& result, const Json& header)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    out << "# " << dump_json(header, 0) << '\n';
    out << "method,rmse_mean,rmse_sd,table\n";
    for (const MethodRmse& m : result.methods) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f(%.2f)", m.mean(), m.sd());
        out << m.method << ',' << format_double(m.mean()) << ',' << format_double(m.sd()) << ',' << buf << '\n';
    }
}

} // namespace atlasgp::suite
