#include "commands.hpp"
#include "benchmark_suite.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

namespace atlasgp::cli {

namespace {

std::string cloud_digest(const PointCloud& cloud)
{
    return fnv1a_hex(dump_json(to_json(cloud.points), 0));
}

Json load_atlas_artifact(const std::string& path, Atlas& atlas)
{
    Json j = read_artifact(path, "atlas");
    atlas = atlas_from_json(j);
    return j;
}

PointCloud cloud_from_atlas(const Atlas& atlas)
{
    const int n = static_cast<int>(atlas.locations.size());
    if (n == 0)
        throw DataError("atlas holds no points");
    int p = atlas.charts.front().p();
    Matrix pts(n, p);
    for (int id = 0; id < n; ++id) {
        const auto& locs = atlas.locations[static_cast<std::size_t>(id)];
        if (locs.empty())
            throw DataError("atlas does not cover point " + std::to_string(id));
        pts.row(id) = atlas.charts[static_cast<std::size_t>(locs.front().chart)].ambient.row(locs.front().index);
    }
    return PointCloud(std::move(pts));
}

Cover cover_from_atlas(const Atlas& atlas)
{
    std::vector<IdList> subsets;
    for (const Chart& c : atlas.charts)
        subsets.push_back(c.subset_ids);
    return make_cover(std::move(subsets));
}

Json base_artifact(const std::string& kind, const Json& config, std::uint64_t seed)
{
    Json j;
    j["kind"] = kind;
    j["format_version"] = 1;
    j["config"] = config;
    j["seed"] = seed;
    return j;
}

} // namespace

int decompose(const DecomposeOpts& o)
{
    PointCloud cloud = read_cloud_csv(o.cloud);
    DecomposeConfig c;
    c.n_subsets = o.n_subsets;
    c.q = o.q;
    c.overlap_k = o.overlap_k;
    c.projection_dim = o.projection_dim;
    c.max_iter = o.max_iter;
    c.seed = o.seed;
    Cover cover = decompose(cloud, c);
    CoverReport report = validate_cover(cloud, cover);
    Json config = {{"cloud", o.cloud},       {"n_subsets", o.n_subsets}, {"q", o.q},
                   {"overlap_k", o.overlap_k}, {"projection_dim", o.projection_dim}, {"max_iter", o.max_iter}};
    Json j = base_artifact("cover", config, o.seed);
    j["cloud_digest"] = cloud_digest(cloud);
    j["n_points"] = cloud.n();
    j["cover"] = cover_to_json(cover);
    j["report"] = {{"complete", report.complete}, {"connected", report.connected}};
    write_artifact(o.out, j);
    std::cerr << report.summary() << "\n";
    return 0;
}

int learn_atlas(const LearnAtlasOpts& o)
{
    PointCloud cloud = read_cloud_csv(o.cloud);
    Json cj = read_artifact(o.cover, "cover");
    if (cj.at("cloud_digest").get<std::string>() != cloud_digest(cloud))
        throw DataError("cover was built from a different cloud (digest mismatch)");
    Cover cover = cover_from_json(cj.at("cover"));
    CoverReport report = validate_cover(cloud, cover);
    if (!report.pass)
        throw DataError("invalid cover: " + report.summary());
    AtlasConfig ac;
    if (o.kind == "auto")
        ac.kind = AtlasKind::automatic;
    else if (o.kind == "gplvm")
        ac.kind = AtlasKind::gplvm;
    else if (o.kind == "identity")
        ac.kind = AtlasKind::identity;
    else
        throw PreconditionError("--kind must be auto, gplvm or identity");
    if (o.init == "isomap")
        ac.gplvm.init = LatentInit::isomap;
    else if (o.init == "pca")
        ac.gplvm.init = LatentInit::pca;
    else
        throw PreconditionError("--init must be isomap or pca");
    ac.gplvm.max_outer_iters = o.max_outer_iters;
    ac.gplvm.seed = o.seed;
    ac.identity_margin = o.identity_margin;
    Atlas atlas = build_atlas(cloud, cover, o.q, ac);
    Json config = {{"cloud", o.cloud},
                   {"cover", o.cover},
                   {"q", o.q},
                   {"kind", o.kind},
                   {"init", o.init},
                   {"max_outer_iters", o.max_outer_iters},
                   {"identity_margin", o.identity_margin}};
    Json j = base_artifact("atlas", config, o.seed);
    j["cloud_digest"] = cloud_digest(cloud);
    j["cover_digest"] = cj.at("digest");
    Json a = atlas_to_json(atlas, cloud.n());
    j["n_points"] = a["n_points"];
    j["charts"] = a["charts"];
    write_artifact(o.out, j);
    return 0;
}

int simulate(const SimulateOpts& o)
{
    Atlas atlas;
    Json aj = load_atlas_artifact(o.atlas, atlas);
    IdList ids = read_ids_csv(o.starts);
    std::vector<Start> starts;
    for (int id : ids) {
        if (id < 0 || id >= static_cast<int>(atlas.locations.size()))
            throw DataError("start id " + std::to_string(id) + " outside the atlas");
        PointLocation loc = atlas.locations[static_cast<std::size_t>(id)].front();
        starts.push_back({loc.chart, atlas.charts[static_cast<std::size_t>(loc.chart)].latent.row(loc.index).transpose()});
    }
    SdeConfig sc;
    sc.dt = o.dt;
    sc.n_steps = o.steps;
    sc.n_paths = o.paths;
    sc.max_rejects = o.max_rejects;
    sc.seed = o.seed;
    sc.record_steps = o.record;
    sc.use_field_cache = !o.no_cache;
    sc.validate();
    Dynamics dyn(atlas, sc);
    std::vector<BmPath> paths = simulate_ensemble(dyn, starts);
    EnsembleStats st = ensemble_stats(paths, sc);
    Json config = {{"atlas", o.atlas},   {"starts", o.starts},       {"dt", o.dt},
                   {"steps", o.steps},   {"paths", o.paths},         {"max_rejects", o.max_rejects},
                   {"record", o.record}, {"field_cache", !o.no_cache}};
    Json header = base_artifact("paths", config, o.seed);
    header["atlas_digest"] = aj.at("digest");
    header["start_ids"] = ids;
    header["stats"] = {{"steps", st.steps},
                       {"reject_exhaustions", st.reject_exhaustions},
                       {"transition_failures", st.transition_failures},
                       {"transitions", st.transitions}};
    write_paths_csv(o.out, header, paths, o.paths);
    std::cerr << "paths: " << paths.size() << ", transitions " << st.transitions << ", reject exhaustions "
              << st.reject_exhaustions << ", transition failures " << st.transition_failures << "\n";
    return 0;
}

int estimate_kernel(const EstimateKernelOpts& o)
{
    Atlas atlas;
    Json aj = load_atlas_artifact(o.atlas, atlas);
    PointCloud cloud = cloud_from_atlas(atlas);
    Cover cover = cover_from_atlas(atlas);
    if (!o.cover.empty()) {
        Json cj = read_artifact(o.cover, "cover");
        if (cj.at("digest") != aj.at("cover_digest"))
            throw DataError("atlas was built from a different cover (digest mismatch)");
        cover = cover_from_json(cj.at("cover"));
    }
    SdeConfig sc;
    sc.dt = o.dt;
    Dynamics dyn(atlas, sc);
    GridConfig gc;
    gc.n_paths = o.paths;
    gc.dt = o.dt;
    gc.times = o.times;
    gc.w = o.window;
    gc.seed = o.seed;
    gc.max_rejects = o.max_rejects;
    HeatKernelGrid grid = build_grid(dyn, cloud, cover, gc);
    Json config = {{"atlas", o.atlas}, {"cover", o.cover}, {"times", o.times},
                   {"paths", o.paths}, {"window", o.window}, {"dt", o.dt}, {"max_rejects", o.max_rejects}};
    Json j = base_artifact("grid", config, o.seed);
    j["atlas_digest"] = aj.at("digest");
    j["grid"] = grid_to_json(grid);
    write_artifact(o.out, j);
    return 0;
}

int fit(const FitOpts& o)
{
    PointCloud cloud = read_cloud_csv(o.cloud);
    Labeled data = read_labeled_csv(o.labeled);
    for (int id : data.ids)
        if (id >= cloud.n())
            throw DataError("labeled id " + std::to_string(id) + " outside the cloud");
    SearchConfig search;
    search.points_per_decade = o.points_per_decade;
    search.budget = o.budget;
    if (o.fix_noise >= 0.0) {
        search.fix_noise = true;
        search.noise_var = o.fix_noise;
    }
    Json config = {{"model", o.model},
                   {"cloud", o.cloud},
                   {"atlas", o.atlas},
                   {"grid", o.grid},
                   {"labeled", o.labeled},
                   {"points_per_decade", o.points_per_decade},
                   {"budget", o.budget},
                   {"fix_noise", o.fix_noise}};
    Json j = base_artifact("model", config, o.seed);
    j["cloud_digest"] = cloud_digest(cloud);
    Labeled copy = data;
    Json lj = {{"ids", copy.ids}, {"y", to_json(copy.y)}};
    j["labeled_digest"] = fnv1a_hex(dump_json(lj, 0));

    auto need = [&](const std::string& v, const char* flag) {
        if (v.empty())
            throw PreconditionError(std::string("--model ") + o.model + " requires " + flag);
    };
    if (o.model == "rc-agp") {
        need(o.atlas, "--atlas");
        need(o.grid, "--grid");
        Atlas atlas;
        Json aj = load_atlas_artifact(o.atlas, atlas);
        Json gj = read_artifact(o.grid, "grid");
        if (gj.at("atlas_digest") != aj.at("digest"))
            throw DataError("grid was estimated on a different atlas (digest mismatch)");
        if (aj.at("cloud_digest").get<std::string>() != cloud_digest(cloud))
            throw DataError("atlas was built from a different cloud (digest mismatch)");
        HeatKernelGrid grid = grid_from_json(gj.at("grid"));
        RcAgpModel m = fit_rc_agp(cloud, cover_from_atlas(atlas), grid, data.ids, data.y, search);
        j["atlas_digest"] = aj.at("digest");
        j["grid_digest"] = gj.at("digest");
        j["fit"] = rc_model_to_json(m);
    } else if (o.model == "s-agp") {
        need(o.atlas, "--atlas");
        Atlas atlas;
        Json aj = load_atlas_artifact(o.atlas, atlas);
        if (aj.at("cloud_digest").get<std::string>() != cloud_digest(cloud))
            throw DataError("atlas was built from a different cloud (digest mismatch)");
        Cover cover = cover_from_atlas(atlas);
        SdeConfig sc;
        sc.dt = o.dt;
        Dynamics dyn(atlas, sc);
        SAgpConfig sconf;
        sconf.n_paths = o.paths;
        sconf.dt = o.dt;
        sconf.times = o.times;
        sconf.w = o.window;
        sconf.seed = o.seed;
        sconf.search = search;
        IdList inducing = select_inducing(cloud, cover, o.inducing);
        InducingHeat heat = estimate_inducing_heat(dyn, cloud, cover, inducing, sconf);
        SAgpModel m = fit_s_agp(heat, data.ids, data.y, sconf);
        j["config"]["inducing"] = o.inducing;
        j["config"]["times"] = o.times;
        j["config"]["paths"] = o.paths;
        j["config"]["window"] = o.window;
        j["config"]["dt"] = o.dt;
        j["atlas_digest"] = aj.at("digest");
        j["fit"] = s_model_to_json(m);
    } else if (o.model == "euclid") {
        EuclideanGp m = fit_euclidean_gp(cloud.rows(data.ids), data.y, search);
        j["fit"] = euclid_model_to_json(m, cloud, data.ids);
    } else if (o.model == "gl") {
        GlConfig gc;
        gc.k_neighbors = o.gl_k;
        gc.n_eigs = o.gl_eigs;
        gc.bandwidth = o.gl_bandwidth;
        gc.t = o.gl_t;
        GlGp m = fit_gl_gp(cloud, data.ids, data.y, gc, search);
        j["config"]["gl_k"] = o.gl_k;
        j["config"]["gl_eigs"] = o.gl_eigs;
        j["config"]["gl_bandwidth"] = o.gl_bandwidth;
        j["config"]["gl_t"] = o.gl_t;
        j["fit"] = gl_model_to_json(m, cloud);
    } else {
        throw PreconditionError("--model must be rc-agp, s-agp, euclid or gl");
    }
    write_artifact(o.out, j);
    return 0;
}

int predict(const PredictOpts& o)
{
    Json j = read_artifact(o.model, "model");
    if (!o.atlas.empty()) {
        Json aj = read_artifact(o.atlas, "atlas");
        if (!j.contains("atlas_digest") || j.at("atlas_digest") != aj.at("digest"))
            throw DataError("model and atlas digests differ: the model was not fitted on this atlas");
    }
    IdList ids = read_ids_csv(o.test);
    const Json& f = j.at("fit");
    const std::string type = f.at("model").get<std::string>();
    MarginalPrediction pred;
    auto check_ids = [&](int n) {
        for (int id : ids)
            if (id < 0 || id >= n)
                throw DataError("test id " + std::to_string(id) + " outside the cloud");
    };
    if (type == "rc-agp") {
        RcAgpModel m = rc_model_from_json(f);
        check_ids(m.cloud.n());
        pred = predict_rc_agp(m, ids);
    } else if (type == "s-agp") {
        SAgpModel m = s_model_from_json(f);
        check_ids(static_cast<int>(m.heat.point_charts.size()));
        pred = predict_s_agp(m, ids);
    } else if (type == "euclid") {
        PointCloud cloud;
        EuclideanGp m = euclid_model_from_json(f, cloud);
        check_ids(cloud.n());
        pred = predict_euclidean_gp(m, cloud.rows(ids));
    } else if (type == "gl") {
        PointCloud cloud;
        GlGp m = gl_model_from_json(f, cloud);
        check_ids(cloud.n());
        pred = predict_gl_gp(m, ids);
    } else {
        throw DataError("unknown model type '" + type + "'");
    }
    Json header = {{"kind", "predictions"},
                   {"model", type},
                   {"model_digest", j.at("digest")},
                   {"config", {{"model", o.model}, {"test", o.test}}},
                   {"seed", j.at("seed")}};
    write_predictions_csv(o.out, header, ids, pred);
    return 0;
}

int benchmark(const BenchmarkOpts& o)
{
    suite::BenchConfig c = suite::default_config(o.suite);
    c.snr_db = o.snr_db;
    c.replicates = o.replicates;
    c.n_labeled = o.labeled;
    c.seed = o.seed;
    if (o.paths > 0)
        c.n_paths = o.paths;
    if (!o.methods.empty())
        c.methods = o.methods;
    if (!o.inducing.empty())
        c.inducing = o.inducing;
    if (c.replicates < 1)
        throw PreconditionError("--replicates must be positive");
    suite::BenchResult r = suite::run_benchmark(c, &std::cerr);
    Json header = base_artifact("benchmark", suite::config_json(c), c.seed);
    header["seconds"] = r.seconds;
    suite::write_results_csv(o.out, r, header);
    for (const suite::MethodRmse& m : r.methods)
        std::cout << m.method << " " << format_double(m.mean()) << " (" << format_double(m.sd()) << ")\n";
    return 0;
}

int selftest()
{
    constexpr double pi = std::numbers::pi;
    int failed = 0;
    auto check = [&](const std::string& name, bool ok, double value) {
        std::cout << (ok ? "ok   " : "FAIL ") << name << " " << format_double(value) << "\n";
        if (!ok)
            ++failed;
    };
    {
        const int m = 10000;
        double s = 0.0;
        for (int k = 0; k < m; ++k)
            s += circle_heat(2.0 * pi * k / m, 0.3).value;
        double integral = s * 2.0 * pi / m;
        check("circle heat integrates to one", std::abs(integral - 1.0) < 1e-8, integral);
    }
    {
        double a = circle_heat(0.0, 0.5).value;
        double b = circle_heat_wrapped(0.0, 0.5);
        check("circle series equals wrapped gaussians", std::abs(a - b) < 1e-10, a - b);
    }
    {
        const double h = 1e-3;
        double s = 0.0;
        for (double u = -20.0; u <= 20.0; u += h)
            s += euclidean_heat_sq(1, u * u, 0.4) * euclidean_heat_sq(1, (0.7 - u) * (0.7 - u), 0.6) * h;
        double ref = euclidean_heat_sq(1, 0.49, 1.0);
        check("euclidean heat semigroup", std::abs(s - ref) < 1e-4, s - ref);
    }
    {
        TorusFixture fx = torus_fixture(5, 5);
        Atlas atlas = torus_analytic_atlas(fx);
        double worst = 0.0;
        for (int i = 0; i < fx.cloud.n(); ++i) {
            Vector x = fx.angles.row(i).transpose();
            Matrix G = atlas.charts[0].expected_metric(x).G;
            worst = std::max(worst, (G - torus_metric(x(0), fx.R, fx.r)).cwiseAbs().maxCoeff());
        }
        check("analytic torus metric", worst <= 1e-12, worst);
    }
    {
        Vector y(100000);
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y(i) = std::sin(0.001 * static_cast<double>(i));
        Vector z = add_noise(y, 20.0, 7);
        double sv = (y.array() - y.mean()).square().mean();
        Vector e = z - y;
        double nv = (e.array() - e.mean()).square().mean();
        double snr = 10.0 * std::log10(sv / nv);
        check("noise level at 20 dB", std::abs(snr - 20.0) < 0.2, snr);
    }
    return failed == 0 ? 0 : 3;
}

} // namespace atlasgp::cli
