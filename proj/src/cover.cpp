#include "atlasgp/cover.hpp"
#include "atlasgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace atlasgp {

PointCloud::PointCloud(Matrix pts) : points(std::move(pts)) {}

Matrix PointCloud::rows(const IdList& ids) const
{
    Matrix out(static_cast<Eigen::Index>(ids.size()), points.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= n())
            throw DataError("point id " + std::to_string(ids[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = points.row(ids[i]);
    }
    return out;
}

void PointCloud::validate() const
{
    if (n() < 2)
        throw DataError("point cloud needs at least 2 points");
    if (p() < 1)
        throw DataError("point cloud needs at least 1 column");
    if (!points.allFinite())
        throw DataError("point cloud contains non-finite values");
    std::vector<int> order(static_cast<std::size_t>(n()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return points(a, 0) < points(b, 0) || (points(a, 0) == points(b, 0) && a < b);
    });
    const double tol = 1e-12;
    for (std::size_t a = 0; a < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            int i = order[a], j = order[b];
            if (points(j, 0) - points(i, 0) > tol)
                break;
            double dmax = (points.row(i) - points.row(j)).cwiseAbs().maxCoeff();
            if (dmax <= tol)
                throw DataError("duplicate points " + std::to_string(std::min(i, j)) + " and " +
                                std::to_string(std::max(i, j)));
        }
    }
}

std::vector<IdList> Cover::membership(int n) const
{
    std::vector<IdList> m(static_cast<std::size_t>(n));
    for (int s = 0; s < size(); ++s)
        for (int id : subsets[static_cast<std::size_t>(s)])
            if (id >= 0 && id < n)
                m[static_cast<std::size_t>(id)].push_back(s);
    return m;
}

namespace {

int intersection_size(const IdList& a, const IdList& b)
{
    int count = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j)
            ++i;
        else if (*j < *i)
            ++j;
        else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

} // namespace

Cover make_cover(std::vector<IdList> subsets)
{
    Cover c;
    for (IdList& s : subsets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    c.subsets = std::move(subsets);
    for (int i = 0; i < c.size(); ++i)
        for (int j = i + 1; j < c.size(); ++j)
            if (intersection_size(c.subsets[static_cast<std::size_t>(i)],
                                  c.subsets[static_cast<std::size_t>(j)]) > 0)
                c.adjacency.emplace_back(i, j);
    return c;
}

bool graph_connected(int n, const std::vector<std::pair<int, int>>& edges)
{
    if (n <= 1)
        return true;
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x)
            x = parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    };
    int components = n;
    for (auto [a, b] : edges) {
        int ra = find(a), rb = find(b);
        if (ra != rb) {
            parent[static_cast<std::size_t>(ra)] = rb;
            --components;
        }
    }
    return components == 1;
}

std::string CoverReport::summary() const
{
    std::ostringstream os;
    os << (pass ? "pass" : "fail") << ": complete=" << complete << " connected=" << connected;
    if (!missing.empty()) {
        os << " missing=[";
        for (std::size_t i = 0; i < missing.size(); ++i)
            os << (i ? "," : "") << missing[i];
        os << "]";
    }
    if (!invalid_ids.empty())
        os << " invalid_ids=" << invalid_ids.size();
    for (const Intersection& x : intersections)
        os << " (" << x.i << "," << x.j << "):" << x.size;
    return os.str();
}

CoverReport validate_cover(const PointCloud& cloud, const Cover& cover)
{
    CoverReport r;
    std::vector<char> seen(static_cast<std::size_t>(cloud.n()), 0);
    std::vector<IdList> sorted = cover.subsets;
    for (IdList& s : sorted) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        for (int id : s) {
            if (id < 0 || id >= cloud.n())
                r.invalid_ids.push_back(id);
            else
                seen[static_cast<std::size_t>(id)] = 1;
        }
    }
    for (int id = 0; id < cloud.n(); ++id)
        if (!seen[static_cast<std::size_t>(id)])
            r.missing.push_back(id);
    r.complete = r.missing.empty() && r.invalid_ids.empty();

    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            int s = intersection_size(sorted[i], sorted[j]);
            if (s > 0) {
                r.intersections.push_back({static_cast<int>(i), static_cast<int>(j), s});
                edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
            }
        }
    r.connected = !sorted.empty() && graph_connected(static_cast<int>(sorted.size()), edges);
    r.pass = r.complete && r.connected;
    return r;
}

Matrix pca_project(const Matrix& X, int dims)
{
    if (dims < 1 || dims > X.cols())
        throw PreconditionError("pca_project: dims must be in [1, p]");
    Matrix C = X.rowwise() - X.colwise().mean();
    Matrix cov = C.transpose() * C / std::max<Eigen::Index>(1, X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    Matrix basis(X.cols(), dims);
    for (int k = 0; k < dims; ++k) {
        Vector v = es.eigenvectors().col(X.cols() - 1 - k);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0)
            v = -v;
        basis.col(k) = v;
    }
    return C * basis;
}

std::vector<IdList> knn(const Matrix& X, int k)
{
    const int n = static_cast<int>(X.rows());
    k = std::min(k, n - 1);
    std::vector<IdList> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) if (n > 256)
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> d;
        d.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            if (j != i)
                d.emplace_back((X.row(i) - X.row(j)).squaredNorm(), j);
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        IdList& nb = out[static_cast<std::size_t>(i)];
        for (int a = 0; a < k; ++a)
            nb.push_back(d[static_cast<std::size_t>(a)].second);
    }
    return out;
}

KMeansResult kmeans(const Matrix& X, int k, std::uint64_t seed, int max_iter, double rel_tol)
{
    const int n = static_cast<int>(X.rows());
    if (k < 1 || k > n)
        throw PreconditionError("kmeans: k must be in [1, n]");
    Rng rng(seed);
    KMeansResult r;
    r.centers.resize(k, X.cols());

    std::uniform_int_distribution<int> first(0, n - 1);
    r.centers.row(0) = X.row(first(rng));
    Vector d2(n);
    for (int i = 0; i < n; ++i)
        d2(i) = (X.row(i) - r.centers.row(0)).squaredNorm();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        double total = d2.sum();
        int pick = n - 1;
        if (total > 0.0) {
            double u = unif(rng) * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= u && d2(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        r.centers.row(c) = X.row(pick);
        for (int i = 0; i < n; ++i)
            d2(i) = std::min(d2(i), (X.row(i) - r.centers.row(c)).squaredNorm());
    }

    r.labels.assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        r.iterations = it + 1;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double d = (X.row(i) - r.centers.row(c)).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            r.labels[static_cast<std::size_t>(i)] = best;
            inertia += bd;
        }
        r.inertia = inertia;
        Matrix sums = Matrix::Zero(k, X.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            sums.row(r.labels[static_cast<std::size_t>(i)]) += X.row(i);
            ++counts[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                r.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        if (std::isfinite(prev) && std::abs(prev - inertia) <= rel_tol * std::max(prev, 1e-300))
            break;
        prev = inertia;
    }
    return r;
}

Cover grow_partition(const PointCloud& cloud, const std::vector<IdList>& partition, int overlap_k)
{
    if (overlap_k < 1)
        throw PreconditionError("overlap_k must be >= 1");
    const int n = cloud.n();
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < partition.size(); ++c)
        for (int id : partition[c])
            label[static_cast<std::size_t>(id)] = static_cast<int>(c);
    std::vector<IdList> grown = partition;
    std::vector<IdList> nbrs = knn(cloud.points, overlap_k);
    for (int id = 0; id < n; ++id) {
        IdList added;
        for (int nb : nbrs[static_cast<std::size_t>(id)]) {
            int c = label[static_cast<std::size_t>(nb)];
            if (c >= 0 && c != label[static_cast<std::size_t>(id)] &&
                std::find(added.begin(), added.end(), c) == added.end()) {
                grown[static_cast<std::size_t>(c)].push_back(id);
                added.push_back(c);
            }
        }
    }
    return make_cover(std::move(grown));
}

Cover decompose(const PointCloud& cloud, const DecomposeConfig& config)
{
    const int n = cloud.n();
    const int q = config.q;
    if (q < 1)
        throw PreconditionError("decompose: q must be >= 1");
    if (config.n_subsets < 1 || config.n_subsets > n / (q + 2))
        throw PreconditionError("decompose: n_subsets must be in [1, n/(q+2)]");
    if (config.overlap_k < 1)
        throw PreconditionError("decompose: overlap_k must be >= 1");

    if (config.n_subsets == 1) {
        IdList all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        return make_cover({all});
    }

    int dims = config.projection_dim > 0 ? config.projection_dim : q;
    dims = std::min(dims, cloud.p());
    Matrix Z = pca_project(cloud.points, dims);

    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
        KMeansResult km = kmeans(Z, config.n_subsets, derive_seed(config.seed, 0x6b6d, attempt),
                                 config.max_iter, config.rel_tol);
        std::vector<IdList> parts(static_cast<std::size_t>(config.n_subsets));
        for (int i = 0; i < n; ++i)
            parts[static_cast<std::size_t>(km.labels[static_cast<std::size_t>(i)])].push_back(i);
        bool empty = std::any_of(parts.begin(), parts.end(),
                                 [](const IdList& s) { return s.empty(); });
        if (empty)
            continue;
        Cover cover = grow_partition(cloud, parts, config.overlap_k);
        bool small = std::any_of(cover.subsets.begin(), cover.subsets.end(),
                                 [&](const IdList& s) { return static_cast<int>(s.size()) < q + 2; });
        if (small)
            continue;
        if (!graph_connected(cover.size(), cover.adjacency))
            throw CoverError("decompose: subsets are not connected after growth; increase overlap_k (currently " +
                             std::to_string(config.overlap_k) + ")");
        return cover;
    }
    throw CoverError("decompose: k-means produced an empty or undersized cluster after " +
                     std::to_string(config.max_retries) + " attempts");
}

int medoid(const PointCloud& cloud, const IdList& ids)
{
    if (ids.empty())
        throw PreconditionError("medoid: empty subset");
    int best = ids.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (int a : ids) {
        double s = 0.0;
        for (int b : ids)
            s += (cloud.points.row(a) - cloud.points.row(b)).norm();
        if (s < best_sum) {
            best_sum = s;
            best = a;
        }
    }
    return best;
}

} // namespace atlasgp
