#include "atlasgp/atlas.hpp"

#include <algorithm>
#include <exception>

namespace atlasgp {

bool Atlas::adjacent(int i, int j) const
{
    if (i == j)
        return true;
    auto key = std::make_pair(std::min(i, j), std::max(i, j));
    return std::binary_search(adjacency.begin(), adjacency.end(), key);
}

IdList Atlas::overlap_targets_at(int i, int index) const
{
    IdList out;
    for (int c : overlap_labels[static_cast<std::size_t>(i)][static_cast<std::size_t>(index)])
        if (c != i)
            out.push_back(c);
    return out;
}

IdList Atlas::overlap_targets(int i, const Vector& x) const
{
    if (i < 0 || i >= size())
        throw PreconditionError("overlap_targets: chart index out of range");
    bool any = false;
    for (auto [a, b] : adjacency)
        if (a == i || b == i) {
            any = true;
            break;
        }
    if (!any)
        return {};
    return overlap_targets_at(i, charts[static_cast<std::size_t>(i)].nearest_latent(x));
}

std::optional<Vector> Atlas::try_transition(int i, int j, const Vector& x,
                                            const BackwardOptions& options) const
{
    const Chart& ci = charts[static_cast<std::size_t>(i)];
    const Chart& cj = charts[static_cast<std::size_t>(j)];
    Vector xj;
    try {
        xj = cj.canonical(cj.backward(ci.forward_mean(x), options));
    } catch (const BackwardMapError&) {
        return std::nullopt;
    }
    if (!cj.in_boundary(xj))
        return std::nullopt;
    return xj;
}

Vector Atlas::transition(int i, int j, const Vector& x, const BackwardOptions& options) const
{
    if (i < 0 || i >= size() || j < 0 || j >= size())
        throw PreconditionError("transition: chart index out of range");
    auto r = try_transition(i, j, x, options);
    if (!r)
        throw TransitionError("transition " + std::to_string(i) + "->" + std::to_string(j) +
                              " lands outside the target chart boundary");
    return *r;
}

void Atlas::index(int n_points)
{
    locations.assign(static_cast<std::size_t>(n_points), {});
    for (int c = 0; c < size(); ++c) {
        const IdList& ids = charts[static_cast<std::size_t>(c)].subset_ids;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (ids[k] < 0 || ids[k] >= n_points)
                throw DataError("atlas: chart " + std::to_string(c) + " references id " +
                                std::to_string(ids[k]) + " outside the cloud");
            locations[static_cast<std::size_t>(ids[k])].push_back({c, static_cast<int>(k)});
        }
    }
    overlap_labels.assign(charts.size(), {});
    adjacency.clear();
    for (int c = 0; c < size(); ++c) {
        const IdList& ids = charts[static_cast<std::size_t>(c)].subset_ids;
        auto& labels = overlap_labels[static_cast<std::size_t>(c)];
        labels.resize(ids.size());
        for (std::size_t k = 0; k < ids.size(); ++k) {
            for (const PointLocation& loc : locations[static_cast<std::size_t>(ids[k])]) {
                labels[k].push_back(loc.chart);
                if (loc.chart > c)
                    adjacency.emplace_back(c, loc.chart);
            }
            std::sort(labels[k].begin(), labels[k].end());
            labels[k].erase(std::unique(labels[k].begin(), labels[k].end()), labels[k].end());
        }
    }
    std::sort(adjacency.begin(), adjacency.end());
    adjacency.erase(std::unique(adjacency.begin(), adjacency.end()), adjacency.end());
}

Atlas assemble_atlas(std::vector<Chart> charts, int n_points)
{
    Atlas a;
    a.charts = std::move(charts);
    a.index(n_points);
    return a;
}

Atlas build_atlas(const PointCloud& cloud, const Cover& cover, int q, const AtlasConfig& config)
{
    if (cover.size() < 1)
        throw PreconditionError("build_atlas: empty cover");
    bool identity = config.kind == AtlasKind::identity ||
                    (config.kind == AtlasKind::automatic && q == cloud.p());
    if (identity && q != cloud.p())
        throw PreconditionError("build_atlas: identity charts require q = p");
    std::vector<Chart> charts(static_cast<std::size_t>(cover.size()));
    std::vector<std::exception_ptr> errors(charts.size());
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < cover.size(); ++c) {
        try {
            const IdList& ids = cover.subsets[static_cast<std::size_t>(c)];
            if (identity) {
                charts[static_cast<std::size_t>(c)] = make_identity_chart(cloud, ids, config.identity_margin);
            } else {
                GplvmConfig g = config.gplvm;
                g.seed = config.gplvm.seed + static_cast<std::uint64_t>(c);
                charts[static_cast<std::size_t>(c)] = train_gplvm(cloud, ids, q, g);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
    }
    for (std::size_t c = 0; c < errors.size(); ++c) {
        if (!errors[c])
            continue;
        try {
            std::rethrow_exception(errors[c]);
        } catch (const PreconditionError& e) {
            throw PreconditionError("subset " + std::to_string(c) + ": " + e.what());
        } catch (const TrainingError& e) {
            throw TrainingError("subset " + std::to_string(c) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("subset " + std::to_string(c) + ": " + e.what(), e.jitter());
        }
    }
    return assemble_atlas(std::move(charts), cloud.n());
}

} // namespace atlasgp
