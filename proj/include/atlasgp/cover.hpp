#pragma once

#include "atlasgp/types.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace atlasgp {

struct PointCloud {
    Matrix points;

    PointCloud() = default;
    explicit PointCloud(Matrix pts);

    int n() const { return static_cast<int>(points.rows()); }
    int p() const { return static_cast<int>(points.cols()); }
    Vector point(int id) const { return points.row(id).transpose(); }
    Matrix rows(const IdList& ids) const;

    /// Throws DataError on n < 2, p < 1, non-finite values or duplicate rows.
    void validate() const;
};

struct Cover {
    std::vector<IdList> subsets;
    std::vector<std::pair<int, int>> adjacency;

    int size() const { return static_cast<int>(subsets.size()); }
    /// Subset indices containing each id, ascending.
    std::vector<IdList> membership(int n) const;
};

/// Sorts each subset and fills the adjacency list.
Cover make_cover(std::vector<IdList> subsets);

struct Intersection {
    int i = 0;
    int j = 0;
    int size = 0;
};

struct CoverReport {
    bool pass = false;
    bool complete = false;
    bool connected = false;
    IdList missing;
    IdList invalid_ids;
    std::vector<Intersection> intersections;
    std::string summary() const;
};

CoverReport validate_cover(const PointCloud& cloud, const Cover& cover);

struct DecomposeConfig {
    int n_subsets = 8;
    int q = 2;
    int overlap_k = 5;
    int projection_dim = 0;
    std::uint64_t seed = 0;
    int max_iter = 100;
    double rel_tol = 1e-6;
    int max_retries = 5;
};

Cover decompose(const PointCloud& cloud, const DecomposeConfig& config);

/// Adds every point whose overlap_k nearest neighbours include a member of the part.
Cover grow_partition(const PointCloud& cloud, const std::vector<IdList>& partition, int overlap_k);

/// Principal-component scores of the centered data.
Matrix pca_project(const Matrix& X, int dims);

/// k nearest neighbours of every row (self excluded), ties broken by lower index.
std::vector<IdList> knn(const Matrix& X, int k);

struct KMeansResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
    int iterations = 0;
};

KMeansResult kmeans(const Matrix& X, int k, std::uint64_t seed, int max_iter = 100,
                    double rel_tol = 1e-6);

/// Member minimizing summed ambient distance to the other members.
int medoid(const PointCloud& cloud, const IdList& ids);

bool graph_connected(int n, const std::vector<std::pair<int, int>>& edges);

} // namespace atlasgp
