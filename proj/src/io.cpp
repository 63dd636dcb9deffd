#include "atlasgp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace atlasgp {

std::string format_double(double v)
{
    if (!std::isfinite(v))
        throw NumericError("cannot serialize a non-finite value", 0.0);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

bool numeric_array(const Json& j)
{
    if (!j.is_array())
        return false;
    for (const Json& e : j)
        if (!e.is_number())
            return false;
    return true;
}

void dump_rec(const Json& j, int indent, int depth, std::string& out)
{
    const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
    const std::string pad_end = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
    case Json::value_t::number_float:
        out += format_double(j.get<double>());
        return;
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        if (numeric_array(j)) {
            out += '[';
            bool first = true;
            for (const Json& e : j) {
                if (!first)
                    out += ',';
                first = false;
                dump_rec(e, indent, depth + 1, out);
            }
            out += ']';
            return;
        }
        out += '[';
        out += nl;
        bool first = true;
        for (const Json& e : j) {
            if (!first) {
                out += ',';
                out += nl;
            }
            first = false;
            out += pad;
            dump_rec(e, indent, depth + 1, out);
        }
        out += nl;
        out += pad_end;
        out += ']';
        return;
    }
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        out += nl;
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) {
                out += ',';
                out += nl;
            }
            first = false;
            out += pad;
            out += Json(it.key()).dump();
            out += indent > 0 ? ": " : ":";
            dump_rec(it.value(), indent, depth + 1, out);
        }
        out += nl;
        out += pad_end;
        out += '}';
        return;
    }
    default:
        out += j.dump();
    }
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep))
        out.push_back(cur);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

std::string trim(const std::string& s)
{
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& v)
{
    std::string t = trim(s);
    if (t.empty())
        return false;
    try {
        std::size_t pos = 0;
        v = std::stod(t, &pos);
        return pos == t.size();
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<std::vector<std::string>> read_rows(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        rows.push_back(split(t, ','));
    }
    return rows;
}

bool is_header(const std::vector<std::string>& row)
{
    double v;
    for (const std::string& c : row)
        if (!parse_double(c, v))
            return true;
    return false;
}

int parse_id(const std::string& s, const std::string& path, std::size_t line)
{
    double v;
    if (!parse_double(s, v) || v != std::floor(v) || v < 0 || v > 2e9)
        throw DataError(path + ": row " + std::to_string(line) + ": invalid id '" + trim(s) + "'");
    return static_cast<int>(v);
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    return out;
}

} // namespace

std::string dump_json(const Json& j, int indent)
{
    std::string out;
    dump_rec(j, indent, 0, out);
    return out;
}

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string artifact_digest(const Json& j)
{
    Json copy = j;
    copy.erase("digest");
    return fnv1a_hex(dump_json(copy, 0));
}

void write_artifact(const std::string& path, Json j)
{
    j["digest"] = artifact_digest(j);
    std::ofstream out = open_out(path);
    out << dump_json(j) << '\n';
}

Json read_artifact(const std::string& path, const std::string& kind)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError(path + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != kind)
        throw DataError(path + ": expected a '" + kind + "' artifact");
    if (!j.contains("digest") || j["digest"].get<std::string>() != artifact_digest(j))
        throw DataError(path + ": digest mismatch; the file was modified or truncated");
    return j;
}

PointCloud read_cloud_csv(const std::string& path)
{
    auto rows = read_rows(path);
    if (!rows.empty() && is_header(rows.front()))
        rows.erase(rows.begin());
    if (rows.empty())
        throw DataError(path + ": no data rows");
    const std::size_t p = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != p)
            throw DataError(path + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                            " columns, expected " + std::to_string(p));
        for (std::size_t c = 0; c < p; ++c) {
            double v;
            if (!parse_double(rows[i][c], v))
                throw DataError(path + ": row " + std::to_string(i + 1) + ": invalid number '" + rows[i][c] + "'");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
        }
    }
    PointCloud cloud(std::move(m));
    cloud.validate();
    return cloud;
}

void write_cloud_csv(const std::string& path, const PointCloud& cloud)
{
    std::ofstream out = open_out(path);
    for (int c = 0; c < cloud.p(); ++c)
        out << (c ? "," : "") << "x" << c;
    out << '\n';
    for (int i = 0; i < cloud.n(); ++i) {
        for (int c = 0; c < cloud.p(); ++c)
            out << (c ? "," : "") << format_double(cloud.points(i, c));
        out << '\n';
    }
}

Labeled read_labeled_csv(const std::string& path)
{
    auto rows = read_rows(path);
    if (!rows.empty() && is_header(rows.front()))
        rows.erase(rows.begin());
    if (rows.empty())
        throw DataError(path + ": no labeled rows");
    Labeled d;
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 2)
            throw DataError(path + ": row " + std::to_string(i + 1) + ": expected id,y");
        d.ids.push_back(parse_id(rows[i][0], path, i + 1));
        double v;
        if (!parse_double(rows[i][1], v) || !std::isfinite(v))
            throw DataError(path + ": row " + std::to_string(i + 1) + ": invalid value");
        d.y(static_cast<Eigen::Index>(i)) = v;
    }
    return d;
}

void write_labeled_csv(const std::string& path, const Labeled& data)
{
    std::ofstream out = open_out(path);
    out << "id,y\n";
    for (std::size_t i = 0; i < data.ids.size(); ++i)
        out << data.ids[i] << ',' << format_double(data.y(static_cast<Eigen::Index>(i))) << '\n';
}

IdList read_ids_csv(const std::string& path)
{
    auto rows = read_rows(path);
    if (!rows.empty() && is_header(rows.front()))
        rows.erase(rows.begin());
    IdList ids;
    for (std::size_t i = 0; i < rows.size(); ++i)
        ids.push_back(parse_id(rows[i][0], path, i + 1));
    if (ids.empty())
        throw DataError(path + ": no ids");
    return ids;
}

void write_predictions_csv(const std::string& path, const Json& header, const IdList& ids,
                           const MarginalPrediction& pred)
{
    std::ofstream out = open_out(path);
    out << "# " << dump_json(header, 0) << '\n';
    out << "id,mean,variance\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << format_double(pred.mean(static_cast<Eigen::Index>(i))) << ','
            << format_double(pred.var(static_cast<Eigen::Index>(i))) << '\n';
}

void write_paths_csv(const std::string& path, const Json& header, const std::vector<BmPath>& paths, int per_start)
{
    std::ofstream out = open_out(path);
    out << "# " << dump_json(header, 0) << '\n';
    int q = 0;
    int p = 0;
    for (const BmPath& bp : paths)
        if (!bp.steps.empty()) {
            q = static_cast<int>(bp.steps.front().latent.size());
            p = static_cast<int>(bp.steps.front().ambient.size());
            break;
        }
    out << "start,path,step,chart,flags";
    for (int c = 0; c < q; ++c)
        out << ",x" << c;
    for (int c = 0; c < p; ++c)
        out << ",s" << c;
    out << '\n';
    for (std::size_t k = 0; k < paths.size(); ++k) {
        for (const PathStep& st : paths[k].steps) {
            out << k / static_cast<std::size_t>(per_start) << ',' << k % static_cast<std::size_t>(per_start) << ','
                << st.step << ',' << st.chart << ',' << static_cast<int>(st.flags);
            for (Eigen::Index c = 0; c < st.latent.size(); ++c)
                out << ',' << format_double(st.latent(c));
            for (Eigen::Index c = 0; c < st.ambient.size(); ++c)
                out << ',' << format_double(st.ambient(c));
            out << '\n';
        }
    }
}

Json to_json(const Matrix& m)
{
    Json j = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(i, c));
        j.push_back(std::move(row));
    }
    return j;
}

Json to_json(const Vector& v)
{
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        j.push_back(v(i));
    return j;
}

Matrix matrix_from_json(const Json& j)
{
    if (!j.is_array())
        throw DataError("expected a matrix");
    if (j.empty())
        return Matrix(0, 0);
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw DataError("ragged matrix");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

Vector vector_from_json(const Json& j)
{
    if (!j.is_array())
        throw DataError("expected a vector");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json cover_to_json(const Cover& cover)
{
    Json j;
    j["subsets"] = cover.subsets;
    Json adj = Json::array();
    for (auto [a, b] : cover.adjacency)
        adj.push_back({a, b});
    j["adjacency"] = adj;
    return j;
}

Cover cover_from_json(const Json& j)
{
    try {
        return make_cover(j.at("subsets").get<std::vector<IdList>>());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed cover: ") + e.what());
    }
}

Json chart_to_json(const Chart& c)
{
    Json j;
    j["kind"] = to_string(c.kind);
    j["subset_ids"] = c.subset_ids;
    j["latent"] = to_json(c.latent);
    j["ambient"] = to_json(c.ambient);
    j["params"] = {{"gamma", c.params.gamma}, {"rho", c.params.rho}, {"noise_var", c.params.noise_var}};
    j["boundary_var_threshold"] = c.boundary_var_threshold;
    j["center"] = to_json(c.center);
    j["box_lo"] = to_json(c.box_lo);
    j["box_hi"] = to_json(c.box_hi);
    j["identity_margin"] = c.identity_margin;
    j["identity_support"] = c.identity_support;
    j["analytic"] = {{"R", c.analytic.R},
                     {"r", c.analytic.r},
                     {"offset", c.analytic.offset},
                     {"half_width", c.analytic.half_width}};
    j["likelihood_history"] = c.likelihood_history;
    j["seed"] = c.seed;
    return j;
}

Chart chart_from_json(const Json& j)
{
    try {
        Chart c;
        c.kind = chart_kind_from_string(j.at("kind").get<std::string>());
        c.subset_ids = j.at("subset_ids").get<IdList>();
        c.latent = matrix_from_json(j.at("latent"));
        c.ambient = matrix_from_json(j.at("ambient"));
        const Json& p = j.at("params");
        c.params = {p.at("gamma").get<double>(), p.at("rho").get<double>(), p.at("noise_var").get<double>()};
        c.boundary_var_threshold = j.at("boundary_var_threshold").get<double>();
        c.center = vector_from_json(j.at("center"));
        c.box_lo = vector_from_json(j.at("box_lo"));
        c.box_hi = vector_from_json(j.at("box_hi"));
        c.identity_margin = j.at("identity_margin").get<double>();
        c.identity_support = j.value("identity_support", 0.0);
        const Json& a = j.at("analytic");
        c.analytic = {a.at("R").get<double>(), a.at("r").get<double>(), a.at("offset").get<double>(),
                      a.at("half_width").get<double>()};
        c.likelihood_history = j.at("likelihood_history").get<std::vector<double>>();
        c.seed = j.at("seed").get<std::uint64_t>();
        if (c.latent.rows() == 0 && !c.subset_ids.empty())
            throw DataError("chart has no latent coordinates");
        c.finalize();
        return c;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed chart: ") + e.what());
    } catch (const ShapeError& e) {
        throw DataError(std::string("malformed chart: ") + e.what());
    }
}

Json atlas_to_json(const Atlas& atlas, int n_points)
{
    Json j;
    j["n_points"] = n_points;
    Json charts = Json::array();
    for (const Chart& c : atlas.charts)
        charts.push_back(chart_to_json(c));
    j["charts"] = charts;
    return j;
}

Atlas atlas_from_json(const Json& j)
{
    std::vector<Chart> charts;
    try {
        for (const Json& c : j.at("charts"))
            charts.push_back(chart_from_json(c));
        return assemble_atlas(std::move(charts), j.at("n_points").get<int>());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed atlas: ") + e.what());
    }
}

Json grid_to_json(const HeatKernelGrid& g)
{
    Json j;
    j["centers"] = g.centers;
    Json targets = Json::array();
    for (const DensityTarget& t : g.center_targets)
        targets.push_back({{"chart", t.chart}, {"latent", to_json(t.latent)}});
    j["center_targets"] = targets;
    j["times"] = g.times;
    j["steps"] = g.steps;
    Json raw = Json::array();
    Json proj = Json::array();
    for (std::size_t k = 0; k < g.raw.size(); ++k) {
        raw.push_back(to_json(g.raw[k]));
        proj.push_back(to_json(g.projected[k]));
    }
    j["raw"] = raw;
    j["projected"] = proj;
    j["n_paths"] = g.n_paths;
    j["w"] = g.w;
    j["dt"] = g.dt;
    j["seed"] = g.seed;
    return j;
}

HeatKernelGrid grid_from_json(const Json& j)
{
    try {
        HeatKernelGrid g;
        g.centers = j.at("centers").get<IdList>();
        for (const Json& t : j.at("center_targets"))
            g.center_targets.push_back({t.at("chart").get<int>(), vector_from_json(t.at("latent"))});
        g.times = j.at("times").get<std::vector<double>>();
        g.steps = j.at("steps").get<std::vector<int>>();
        for (const Json& m : j.at("raw"))
            g.raw.push_back(matrix_from_json(m));
        for (const Json& m : j.at("projected"))
            g.projected.push_back(matrix_from_json(m));
        g.n_paths = j.at("n_paths").get<long>();
        g.w = j.at("w").get<double>();
        g.dt = j.at("dt").get<double>();
        g.seed = j.at("seed").get<std::uint64_t>();
        if (g.raw.size() != g.times.size() || g.projected.size() != g.times.size())
            throw DataError("grid: one matrix per time required");
        return g;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed grid: ") + e.what());
    }
}

Json rc_model_to_json(const RcAgpModel& m)
{
    Json j;
    j["model"] = "rc-agp";
    j["params"] = {{"time_index", m.params.time_index},
                   {"rho", m.params.rho},
                   {"sigma_r2", m.params.sigma_r2},
                   {"noise_var", m.params.noise_var}};
    j["t"] = m.t;
    j["log_lik"] = m.log_lik;
    j["K_h"] = to_json(m.K_h);
    j["heat_scale"] = m.heat_scale;
    j["centers"] = m.centers;
    j["cover"] = cover_to_json(m.cover);
    j["cloud"] = to_json(m.cloud.points);
    j["train_ids"] = m.train_ids;
    j["train_blocks"] = m.train_blocks;
    j["y"] = to_json(m.y);
    return j;
}

RcAgpModel rc_model_from_json(const Json& j)
{
    try {
        RcAgpModel m;
        const Json& p = j.at("params");
        m.params = {p.at("time_index").get<int>(), p.at("rho").get<double>(), p.at("sigma_r2").get<double>(),
                    p.at("noise_var").get<double>()};
        m.t = j.at("t").get<double>();
        m.log_lik = j.at("log_lik").get<double>();
        m.K_h = matrix_from_json(j.at("K_h"));
        m.heat_scale = j.at("heat_scale").get<double>();
        m.centers = j.at("centers").get<IdList>();
        m.cover = cover_from_json(j.at("cover"));
        m.cloud = PointCloud(matrix_from_json(j.at("cloud")));
        m.train_ids = j.at("train_ids").get<IdList>();
        m.train_blocks = j.at("train_blocks").get<IdList>();
        m.y = vector_from_json(j.at("y"));
        m.finalize();
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed rc-agp model: ") + e.what());
    }
}

Json s_model_to_json(const SAgpModel& m)
{
    Json j;
    j["model"] = "s-agp";
    j["params"] = {{"time_index", m.params.time_index},
                   {"rescale", m.params.rescale},
                   {"noise_var", m.params.noise_var}};
    j["log_lik"] = m.log_lik;
    Json h;
    h["inducing"] = m.heat.inducing;
    h["point_charts"] = m.heat.point_charts;
    h["times"] = m.heat.times;
    Json uu = Json::array();
    Json ua = Json::array();
    for (std::size_t k = 0; k < m.heat.times.size(); ++k) {
        uu.push_back(to_json(m.heat.uu[k]));
        ua.push_back(to_json(m.heat.u_all[k]));
    }
    h["uu"] = uu;
    h["u_all"] = ua;
    h["scale"] = m.heat.scale;
    h["w"] = m.heat.w;
    j["heat"] = h;
    j["sim"] = {{"n_paths", m.config.n_paths},
                {"dt", m.config.dt},
                {"seed", m.config.seed},
                {"max_rejects", m.config.max_rejects}};
    j["train_ids"] = m.train_ids;
    j["y"] = to_json(m.y);
    return j;
}

SAgpModel s_model_from_json(const Json& j)
{
    try {
        SAgpModel m;
        const Json& p = j.at("params");
        m.params = {p.at("time_index").get<int>(), p.at("rescale").get<double>(), p.at("noise_var").get<double>()};
        m.log_lik = j.at("log_lik").get<double>();
        const Json& h = j.at("heat");
        m.heat.inducing = h.at("inducing").get<IdList>();
        m.heat.point_charts = h.at("point_charts").get<IdList>();
        m.heat.times = h.at("times").get<std::vector<double>>();
        for (const Json& x : h.at("uu"))
            m.heat.uu.push_back(matrix_from_json(x));
        for (const Json& x : h.at("u_all"))
            m.heat.u_all.push_back(matrix_from_json(x));
        m.heat.scale = h.at("scale").get<std::vector<double>>();
        m.heat.w = h.at("w").get<double>();
        const Json& s = j.at("sim");
        m.config.n_paths = s.at("n_paths").get<long>();
        m.config.dt = s.at("dt").get<double>();
        m.config.seed = s.at("seed").get<std::uint64_t>();
        m.config.max_rejects = s.at("max_rejects").get<int>();
        m.config.times = m.heat.times;
        m.train_ids = j.at("train_ids").get<IdList>();
        m.y = vector_from_json(j.at("y"));
        m.finalize();
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed s-agp model: ") + e.what());
    }
}

Json euclid_model_to_json(const EuclideanGp& m, const PointCloud& cloud, const IdList& ids)
{
    Json j;
    j["model"] = "euclid";
    j["params"] = {{"gamma", m.params.gamma}, {"rho", m.params.rho}, {"noise_var", m.params.noise_var}};
    j["log_lik"] = m.log_lik;
    j["cloud"] = to_json(cloud.points);
    j["train_ids"] = ids;
    j["y"] = to_json(m.y);
    return j;
}

EuclideanGp euclid_model_from_json(const Json& j, PointCloud& cloud)
{
    try {
        cloud = PointCloud(matrix_from_json(j.at("cloud")));
        IdList ids = j.at("train_ids").get<IdList>();
        const Json& p = j.at("params");
        EuclideanGp m;
        m.params = {p.at("gamma").get<double>(), p.at("rho").get<double>(), p.at("noise_var").get<double>()};
        m.X = cloud.rows(ids);
        m.y = vector_from_json(j.at("y"));
        m.log_lik = j.at("log_lik").get<double>();
        m.finalize();
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed euclid model: ") + e.what());
    }
}

Json gl_model_to_json(const GlGp& m, const PointCloud& cloud)
{
    Json j;
    j["model"] = "gl";
    j["gl"] = {{"bandwidth", m.spectrum.bandwidth},
               {"k_neighbors", m.config.k_neighbors},
               {"n_eigs", m.config.n_eigs}};
    j["params"] = {{"t", m.t}, {"rescale", m.rescale}, {"noise_var", m.noise_var}};
    j["log_lik"] = m.log_lik;
    j["cloud"] = to_json(cloud.points);
    j["train_ids"] = m.train_ids;
    j["y"] = to_json(m.y);
    return j;
}

GlGp gl_model_from_json(const Json& j, PointCloud& cloud)
{
    try {
        cloud = PointCloud(matrix_from_json(j.at("cloud")));
        GlGp m;
        const Json& g = j.at("gl");
        m.config.bandwidth = g.at("bandwidth").get<double>();
        m.config.k_neighbors = g.at("k_neighbors").get<int>();
        m.config.n_eigs = g.at("n_eigs").get<int>();
        const Json& p = j.at("params");
        m.t = p.at("t").get<double>();
        m.config.t = m.t;
        m.rescale = p.at("rescale").get<double>();
        m.noise_var = p.at("noise_var").get<double>();
        m.spectrum = gl_spectrum(cloud.points, m.config);
        m.train_ids = j.at("train_ids").get<IdList>();
        m.y = vector_from_json(j.at("y"));
        m.finalize();
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed gl model: ") + e.what());
    }
}

} // namespace atlasgp
