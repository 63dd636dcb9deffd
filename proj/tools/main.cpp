#include "commands.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <fstream>
#include <iostream>
#include <set>

using atlasgp::Json;

namespace {

std::string flag_value(const Json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned())
        return v.dump();
    if (v.is_number_float())
        return atlasgp::format_double(v.get<double>());
    throw atlasgp::DataError("config values must be strings, numbers, booleans or arrays of those");
}

/// Appends config entries as flags unless the flag is already on the command line.
std::vector<std::string> inject_config(std::vector<std::string> args, const std::set<std::string>& subcommands)
{
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty())
        return args;
    std::ifstream in(path);
    if (!in)
        throw atlasgp::DataError("cannot open config file " + path);
    Json cfg;
    try {
        cfg = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw atlasgp::DataError("config file " + path + ": " + e.what());
    }
    if (!cfg.is_object())
        throw atlasgp::DataError("config file must hold a JSON object");
    std::string sub;
    for (const std::string& a : args)
        if (subcommands.count(a)) {
            sub = a;
            break;
        }
    Json flat = Json::object();
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (!it.value().is_object())
            flat[it.key()] = it.value();
    if (!sub.empty() && cfg.contains(sub) && cfg[sub].is_object())
        for (auto it = cfg[sub].begin(); it != cfg[sub].end(); ++it)
            flat[it.key()] = it.value();
    for (auto it = flat.begin(); it != flat.end(); ++it) {
        std::string name = it.key();
        std::replace(name.begin(), name.end(), '_', '-');
        std::string flag = "--" + name;
        bool given = false;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0)
                given = true;
        if (given || name == "config")
            continue;
        const Json& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>())
                args.push_back(flag);
        } else if (v.is_array()) {
            if (v.empty())
                continue;
            args.push_back(flag);
            for (const Json& e : v)
                args.push_back(flag_value(e));
        } else {
            args.push_back(flag);
            args.push_back(flag_value(v));
        }
    }
    return args;
}

template <class E>
bool is(const std::exception& e)
{
    return dynamic_cast<const E*>(&e) != nullptr;
}

int exit_code(const std::exception& e)
{
    using namespace atlasgp;
    if (is<PreconditionError>(e))
        return 1;
    if (is<DataError>(e) || is<AssignmentError>(e) || is<CoverError>(e) || is<ShapeError>(e))
        return 2;
    return 3;
}

} // namespace

int main(int argc, char** argv)
{
    namespace cli = atlasgp::cli;
    CLI::App app{"Heat-kernel Gaussian processes on point clouds via learned atlases", "atlasgp"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    std::string config_path;
    app.add_option("--threads", threads, "Maximum worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--config", config_path, "JSON file of option values; command-line flags take precedence");

    cli::DecomposeOpts dec;
    auto* c_dec = app.add_subcommand("decompose", "Split a point cloud into overlapping subsets");
    c_dec->add_option("--cloud", dec.cloud, "Point cloud CSV")->required();
    c_dec->add_option("--out", dec.out, "Cover JSON")->required();
    c_dec->add_option("--n-subsets", dec.n_subsets, "Number of subsets");
    c_dec->add_option("-q,--q", dec.q, "Intrinsic dimension");
    c_dec->add_option("--overlap-k", dec.overlap_k, "Neighbours used to grow overlaps");
    c_dec->add_option("--projection-dim", dec.projection_dim, "PCA dimension for clustering (0: q)");
    c_dec->add_option("--max-iter", dec.max_iter, "k-means iterations");
    c_dec->add_option("--seed", dec.seed, "Random seed");

    cli::LearnAtlasOpts la;
    auto* c_la = app.add_subcommand("learn-atlas", "Fit one chart per cover subset");
    c_la->add_option("--cloud", la.cloud, "Point cloud CSV")->required();
    c_la->add_option("--cover", la.cover, "Cover JSON")->required();
    c_la->add_option("--out", la.out, "Atlas JSON")->required();
    c_la->add_option("-q,--q", la.q, "Intrinsic dimension");
    c_la->add_option("--kind", la.kind, "auto, gplvm or identity");
    c_la->add_option("--init", la.init, "Latent initialization: isomap or pca");
    c_la->add_option("--max-outer-iters", la.max_outer_iters, "GPLVM alternation limit");
    c_la->add_option("--identity-margin", la.identity_margin, "Identity chart box margin (negative: default)");
    c_la->add_option("--seed", la.seed, "Random seed");

    cli::SimulateOpts sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate Brownian paths on an atlas");
    c_sim->add_option("--atlas", sim.atlas, "Atlas JSON")->required();
    c_sim->add_option("--starts", sim.starts, "CSV of start point ids")->required();
    c_sim->add_option("--out", sim.out, "Paths CSV")->required();
    c_sim->add_option("--dt", sim.dt, "Time step");
    c_sim->add_option("--steps", sim.steps, "Steps per path");
    c_sim->add_option("--paths", sim.paths, "Paths per start");
    c_sim->add_option("--max-rejects", sim.max_rejects, "Proposal retries per step");
    c_sim->add_option("--record", sim.record, "Steps to record (default: all)");
    c_sim->add_flag("--no-cache", sim.no_cache, "Evaluate metric fields directly");
    c_sim->add_option("--seed", sim.seed, "Random seed");

    cli::EstimateKernelOpts ek;
    auto* c_ek = app.add_subcommand("estimate-kernel", "Estimate the heat kernel between subset centers");
    c_ek->add_option("--atlas", ek.atlas, "Atlas JSON")->required();
    c_ek->add_option("--cover", ek.cover, "Cover JSON (default: the atlas subsets)");
    c_ek->add_option("--out", ek.out, "Grid JSON")->required();
    c_ek->add_option("--times", ek.times, "Diffusion times");
    c_ek->add_option("--paths", ek.paths, "Paths per center");
    c_ek->add_option("--window", ek.window, "Window half-width (0: default)");
    c_ek->add_option("--dt", ek.dt, "Time step");
    c_ek->add_option("--max-rejects", ek.max_rejects, "Proposal retries per step");
    c_ek->add_option("--seed", ek.seed, "Random seed");

    cli::FitOpts fo;
    auto* c_fit = app.add_subcommand("fit", "Fit a regression model to labeled points");
    c_fit->add_option("--model", fo.model, "rc-agp, s-agp, euclid or gl")->required();
    c_fit->add_option("--cloud", fo.cloud, "Point cloud CSV")->required();
    c_fit->add_option("--labeled", fo.labeled, "CSV of id,y")->required();
    c_fit->add_option("--out", fo.out, "Model JSON")->required();
    c_fit->add_option("--atlas", fo.atlas, "Atlas JSON (rc-agp, s-agp)");
    c_fit->add_option("--grid", fo.grid, "Grid JSON (rc-agp)");
    c_fit->add_option("--points-per-decade", fo.points_per_decade, "Search grid density");
    c_fit->add_option("--budget", fo.budget, "Likelihood evaluation budget");
    c_fit->add_option("--fix-noise", fo.fix_noise, "Fixed noise variance (negative: estimate)");
    c_fit->add_option("--inducing", fo.inducing, "Inducing points (s-agp)");
    c_fit->add_option("--times", fo.times, "Diffusion times (s-agp)");
    c_fit->add_option("--paths", fo.paths, "Paths per inducing point (s-agp)");
    c_fit->add_option("--window", fo.window, "Window half-width (s-agp, 0: default)");
    c_fit->add_option("--dt", fo.dt, "Time step (s-agp)");
    c_fit->add_option("--gl-k", fo.gl_k, "Graph neighbours (gl)");
    c_fit->add_option("--gl-eigs", fo.gl_eigs, "Eigenpairs kept (gl, 0: all)");
    c_fit->add_option("--gl-bandwidth", fo.gl_bandwidth, "Kernel bandwidth (gl, 0: default)");
    c_fit->add_option("--gl-t", fo.gl_t, "Diffusion time (gl, 0: search)");
    c_fit->add_option("--seed", fo.seed, "Random seed");

    cli::PredictOpts po;
    auto* c_pred = app.add_subcommand("predict", "Predict at test points with a fitted model");
    c_pred->add_option("--model", po.model, "Model JSON")->required();
    c_pred->add_option("--test", po.test, "CSV of test ids")->required();
    c_pred->add_option("--out", po.out, "Predictions CSV")->required();
    c_pred->add_option("--atlas", po.atlas, "Atlas JSON to check against the model");

    cli::BenchmarkOpts bo;
    auto* c_bench = app.add_subcommand("benchmark", "Run a regression benchmark suite");
    c_bench->add_option("--suite", bo.suite, "ushape or torus")->check(CLI::IsMember({"ushape", "torus"}));
    c_bench->add_option("--out", bo.out, "Results CSV")->required();
    c_bench->add_option("--snr-db", bo.snr_db, "Signal-to-noise ratio in dB");
    c_bench->add_option("--replicates", bo.replicates, "Replicates");
    c_bench->add_option("--labeled", bo.labeled, "Labeled points per replicate");
    c_bench->add_option("--paths", bo.paths, "Paths per center (0: suite default)");
    c_bench->add_option("--methods", bo.methods, "Methods to run");
    c_bench->add_option("--inducing", bo.inducing, "Inducing set sizes for s-agp");
    c_bench->add_option("--seed", bo.seed, "Random seed");

    auto* c_self = app.add_subcommand("selftest", "Check analytic oracles");

    std::set<std::string> names;
    for (const CLI::App* s : app.get_subcommands({}))
        names.insert(s->get_name());

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = inject_config(std::move(args), names);
        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e);
            return code == 0 ? 0 : 1;
        }
        if (threads > 0)
            omp_set_num_threads(threads);
        if (c_dec->parsed())
            return cli::decompose(dec);
        if (c_la->parsed())
            return cli::learn_atlas(la);
        if (c_sim->parsed())
            return cli::simulate(sim);
        if (c_ek->parsed())
            return cli::estimate_kernel(ek);
        if (c_fit->parsed())
            return cli::fit(fo);
        if (c_pred->parsed())
            return cli::predict(po);
        if (c_bench->parsed())
            return cli::benchmark(bo);
        if (c_self->parsed())
            return cli::selftest();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    }
}
