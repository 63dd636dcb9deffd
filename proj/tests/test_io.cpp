#include <doctest.h>

#include "fixtures.hpp"

#include "atlasgp/io.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <unistd.h>

using namespace atlasgp;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("atlasgp_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
}

IdList iota_ids(int n, int first = 0)
{
    IdList ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), first);
    return ids;
}

PointCloud arc_cloud(int n)
{
    Matrix X(n, 2);
    for (int i = 0; i < n; ++i) {
        double a = 2.5 * i / (n - 1);
        X(i, 0) = std::cos(a);
        X(i, 1) = std::sin(a);
    }
    return PointCloud(X);
}

HeatKernelGrid small_grid()
{
    HeatKernelGrid g;
    g.centers = {1, 6};
    g.times = {0.5, 1.0};
    g.steps = {50, 100};
    Matrix a(2, 2), b(2, 2);
    a << 0.9, 0.1 / 3.0, 0.1 / 3.0, 0.8;
    b << 0.5, 0.2, 0.2, 0.6;
    g.raw = {a, b};
    g.projected = {a, b};
    g.center_targets = {{0, Vector::Constant(1, 0.25)}, {1, Vector::Constant(1, -0.5)}};
    g.n_paths = 1234;
    g.w = 0.07;
    g.dt = 0.01;
    g.seed = 99;
    return g;
}

} // namespace

TEST_CASE("doubles are written with 17 significant digits")
{
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
    CHECK_THROWS_AS(format_double(std::nan("")), NumericError);
    CHECK_THROWS_AS(format_double(std::numeric_limits<double>::infinity()), NumericError);

    Json j = {{"b", 0.1}, {"a", std::vector<double>{1.0 / 3.0, 2e-300}}, {"n", 7}, {"s", "x"}};
    std::string text = dump_json(j);
    CHECK(text.find("0.10000000000000001") != std::string::npos);
    CHECK(text.find("\"a\"") < text.find("\"b\""));
    Json back = Json::parse(text);
    CHECK(back["b"].get<double>() == 0.1);
    CHECK(back["a"][0].get<double>() == 1.0 / 3.0);
    CHECK(back["a"][1].get<double>() == 2e-300);
    CHECK(back["n"].get<int>() == 7);
    CHECK(dump_json(back) == text);
}

TEST_CASE("FNV-1a digests")
{
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    Json j = {{"kind", "x"}, {"v", 1.5}};
    Json k = j;
    k["digest"] = "anything";
    CHECK(artifact_digest(j) == artifact_digest(k));
    k["v"] = 1.25;
    CHECK(artifact_digest(j) != artifact_digest(k));
}

TEST_CASE("artifacts round trip and detect tampering")
{
    TempDir dir;
    std::string path = dir.file("a.json");
    Json j = {{"kind", "cover"}, {"value", 0.1}};
    write_artifact(path, j);
    Json r = read_artifact(path, "cover");
    CHECK(r["value"].get<double>() == 0.1);
    CHECK(r["digest"].get<std::string>() == artifact_digest(j));
    CHECK_THROWS_AS(read_artifact(path, "atlas"), DataError);

    std::string text = slurp(path);
    auto pos = text.find("0.10000000000000001");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 3, "0.2");
    spit(path, text);
    CHECK_THROWS_AS(read_artifact(path, "cover"), DataError);
    spit(path, "{ not json");
    CHECK_THROWS_AS(read_artifact(path, "cover"), DataError);
    CHECK_THROWS_AS(read_artifact(dir.file("missing.json"), "cover"), DataError);
}

TEST_CASE("cloud and labeled CSV round trip")
{
    TempDir dir;
    PointCloud c = arc_cloud(9);
    write_cloud_csv(dir.file("c.csv"), c);
    CHECK(read_cloud_csv(dir.file("c.csv")).points == c.points);

    spit(dir.file("raw.csv"), "1,2\n3,4\n5,6\n");
    CHECK(read_cloud_csv(dir.file("raw.csv")).n() == 3);
    spit(dir.file("ragged.csv"), "1,2\n3\n");
    CHECK_THROWS_AS(read_cloud_csv(dir.file("ragged.csv")), DataError);
    spit(dir.file("word.csv"), "x,y\n1,2\n3,abc\n");
    CHECK_THROWS_AS(read_cloud_csv(dir.file("word.csv")), DataError);
    spit(dir.file("nan.csv"), "1,2\n3,nan\n");
    CHECK_THROWS_AS(read_cloud_csv(dir.file("nan.csv")), DataError);
    spit(dir.file("dup.csv"), "1,2\n1,2\n");
    CHECK_THROWS_AS(read_cloud_csv(dir.file("dup.csv")), DataError);

    Labeled l{{3, 0, 8}, Vector::LinSpaced(3, -0.1, 0.7)};
    write_labeled_csv(dir.file("l.csv"), l);
    Labeled back = read_labeled_csv(dir.file("l.csv"));
    CHECK(back.ids == l.ids);
    CHECK(back.y == l.y);
    spit(dir.file("bad.csv"), "id,y\n1.5,2\n");
    CHECK_THROWS_AS(read_labeled_csv(dir.file("bad.csv")), DataError);

    spit(dir.file("ids.csv"), "id\n4\n2\n");
    CHECK(read_ids_csv(dir.file("ids.csv")) == IdList{4, 2});
}

TEST_CASE("prediction CSV carries a JSON header")
{
    TempDir dir;
    MarginalPrediction p{Vector::Constant(2, 0.1), Vector::Constant(2, 1.0 / 3.0)};
    write_predictions_csv(dir.file("p.csv"), {{"model_digest", "abc"}}, {5, 7}, p);
    std::istringstream in(slurp(dir.file("p.csv")));
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("# ", 0) == 0);
    CHECK(Json::parse(line.substr(2))["model_digest"] == "abc");
    std::getline(in, line);
    CHECK(line == "id,mean,variance");
    std::getline(in, line);
    CHECK(line == "5,0.10000000000000001,0.33333333333333331");
}

TEST_CASE("cover, chart and atlas round trip")
{
    PointCloud cloud = arc_cloud(12);
    Cover cover = make_cover({iota_ids(7), iota_ids(7, 5)});
    Cover cb = cover_from_json(Json::parse(dump_json(cover_to_json(cover))));
    CHECK(cb.subsets == cover.subsets);
    CHECK(cb.adjacency == cover.adjacency);

    Chart g = train_gplvm(cloud, cover.subsets[0], 1);
    Chart gb = chart_from_json(Json::parse(dump_json(chart_to_json(g))));
    for (double x : {-1.0, -0.2, 0.4, 3.0}) {
        Vector v = Vector::Constant(1, x);
        CHECK(gb.forward_mean(v) == g.forward_mean(v));
        CHECK(gb.forward_var(v) == g.forward_var(v));
        CHECK(gb.in_boundary(v) == g.in_boundary(v));
        CHECK(gb.expected_metric(v).G == g.expected_metric(v).G);
    }
    CHECK(gb.likelihood_history == g.likelihood_history);

    Chart id = make_identity_chart(cloud, cover.subsets[1]);
    Atlas a = assemble_atlas({g, id}, cloud.n());
    Json aj = atlas_to_json(a, cloud.n());
    Atlas ab = atlas_from_json(Json::parse(dump_json(aj)));
    REQUIRE(ab.size() == 2);
    CHECK(ab.charts[1].identity_support == id.identity_support);
    CHECK(ab.adjacent(0, 1) == a.adjacent(0, 1));
    for (int k = 0; k < 12; ++k) {
        Vector s = cloud.point(k);
        CHECK(ab.charts[1].in_boundary(s) == a.charts[1].in_boundary(s));
    }
    CHECK(dump_json(atlas_to_json(ab, cloud.n())) == dump_json(aj));

    Json broken = aj;
    broken["charts"][0].erase("latent");
    CHECK_THROWS_AS(atlas_from_json(broken), DataError);
}

TEST_CASE("grid round trip")
{
    HeatKernelGrid g = small_grid();
    HeatKernelGrid b = grid_from_json(Json::parse(dump_json(grid_to_json(g))));
    CHECK(b.centers == g.centers);
    CHECK(b.times == g.times);
    CHECK(b.steps == g.steps);
    CHECK(b.projected[0] == g.projected[0]);
    CHECK(b.raw[1] == g.raw[1]);
    CHECK(b.n_paths == g.n_paths);
    CHECK(b.w == g.w);
    CHECK(b.seed == g.seed);
    Json j = grid_to_json(g);
    j["projected"].erase(1);
    CHECK_THROWS_AS(grid_from_json(j), DataError);
}

TEST_CASE("model round trips predict identically")
{
    PointCloud cloud = arc_cloud(12);
    Cover cover = make_cover({iota_ids(7), iota_ids(7, 5)});
    IdList train = {0, 2, 4, 7, 9, 11};
    Vector y(6);
    y << 0.1, 0.5, -0.3, 0.8, 1.0 / 3.0, -0.7;
    IdList test = {1, 3, 5, 6, 8, 10};

    SUBCASE("rc-agp")
    {
        RcAgpModel m = make_rc_agp(cloud, cover, small_grid(), train, y, {1, 2.0, 0.7, 0.01});
        RcAgpModel b = rc_model_from_json(Json::parse(dump_json(rc_model_to_json(m))));
        auto p = predict_rc_agp(m, test), q = predict_rc_agp(b, test);
        CHECK(p.mean == q.mean);
        CHECK(p.var == q.var);
        CHECK(b.log_lik == m.log_lik);
        CHECK(b.t == 1.0);
    }
    SUBCASE("s-agp")
    {
        Matrix A = fixtures::gaussian_matrix(6, 12, 3);
        Matrix full = A.transpose() * A / 6.0;
        InducingHeat h;
        h.inducing = {0, 6, 11};
        h.times = {1.0};
        Matrix uu(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                uu(i, j) = full(h.inducing[static_cast<std::size_t>(i)], h.inducing[static_cast<std::size_t>(j)]);
        Matrix ua(3, 12);
        for (int i = 0; i < 3; ++i)
            ua.row(i) = full.row(h.inducing[static_cast<std::size_t>(i)]);
        h.uu = {uu};
        h.u_all = {ua};
        h.scale = {2.5};
        h.point_charts = IdList(12, 0);
        h.w = 0.1;
        SAgpModel m = make_s_agp(h, train, y, {}, {0, 1.3, 0.05});
        SAgpModel b = s_model_from_json(Json::parse(dump_json(s_model_to_json(m))));
        auto p = predict_s_agp(m, test), q = predict_s_agp(b, test);
        CHECK(p.mean == q.mean);
        CHECK(p.var == q.var);
        CHECK(b.heat.inducing == h.inducing);
    }
    SUBCASE("euclid")
    {
        EuclideanGp m = make_euclidean_gp(cloud.rows(train), y, {1.1, 3.0, 0.02});
        PointCloud c2;
        EuclideanGp b = euclid_model_from_json(Json::parse(dump_json(euclid_model_to_json(m, cloud, train))), c2);
        CHECK(c2.points == cloud.points);
        auto p = predict_euclidean_gp(m, cloud.rows(test)), q = predict_euclidean_gp(b, cloud.rows(test));
        CHECK(p.mean == q.mean);
        CHECK(p.var == q.var);
    }
    SUBCASE("gl")
    {
        GlConfig gc;
        gc.k_neighbors = 3;
        gc.t = 2.0;
        GlGp m = fit_gl_gp(cloud, train, y, gc);
        PointCloud c2;
        GlGp b = gl_model_from_json(Json::parse(dump_json(gl_model_to_json(m, cloud))), c2);
        auto p = predict_gl_gp(m, test), q = predict_gl_gp(b, test);
        CHECK((p.mean - q.mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((p.var - q.var).cwiseAbs().maxCoeff() < 1e-12);
    }
}
