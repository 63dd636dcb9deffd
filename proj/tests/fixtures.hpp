#pragma once

#include "atlasgp/oracles.hpp"
#include "atlasgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fixtures {

using namespace atlasgp;

/// Four ring sectors times two tube bands, grown by five neighbours.
inline Cover torus_cover(const TorusFixture& fx, int overlap_k = 5)
{
    return grow_partition(fx.cloud, torus_partition(fx.angles, 4, 2), overlap_k);
}

/// Tube and ring angles of an ambient point near the torus.
inline Vector torus_angles(const Vector& s, double R = 2.0)
{
    Vector a(2);
    a << std::atan2(s(2), std::hypot(s(0), s(1)) - R), std::atan2(s(1), s(0));
    return a;
}

inline Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = nd(rng);
    return m;
}

} // namespace fixtures

namespace fixtures {

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic distribution).
inline double ks_pvalue(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v)
            ++i;
        while (j < b.size() && b[j] <= v)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    double ne = std::sqrt(na * nb / (na + nb));
    double lambda = (ne + 0.12 + 0.11 / ne) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

} // namespace fixtures
