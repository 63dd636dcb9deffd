#pragma once

#include "atlasgp/chart.hpp"

#include <optional>

namespace atlasgp {

enum class AtlasKind { automatic, gplvm, identity };

struct AtlasConfig {
    AtlasKind kind = AtlasKind::automatic;
    GplvmConfig gplvm;
    double identity_margin = -1.0;
};

struct PointLocation {
    int chart = 0;
    int index = 0;
};

class Atlas {
public:
    std::vector<Chart> charts;
    /// overlap_labels[i][j]: charts containing the ambient point of latent j in chart i.
    std::vector<std::vector<IdList>> overlap_labels;
    std::vector<std::pair<int, int>> adjacency;
    /// For every cloud id, the charts (and row) holding it.
    std::vector<std::vector<PointLocation>> locations;

    int size() const { return static_cast<int>(charts.size()); }
    bool adjacent(int i, int j) const;

    IdList overlap_targets(int i, const Vector& x) const;
    /// Labels of the given training latent of chart i, excluding i.
    IdList overlap_targets_at(int i, int index) const;

    std::optional<Vector> try_transition(int i, int j, const Vector& x,
                                         const BackwardOptions& options = {}) const;
    /// Throws TransitionError when the image leaves chart j.
    Vector transition(int i, int j, const Vector& x, const BackwardOptions& options = {}) const;

    /// Recomputes labels, adjacency and locations from the charts' subset ids.
    void index(int n_points);
};

Atlas build_atlas(const PointCloud& cloud, const Cover& cover, int q, const AtlasConfig& config = {});

Atlas assemble_atlas(std::vector<Chart> charts, int n_points);

} // namespace atlasgp
