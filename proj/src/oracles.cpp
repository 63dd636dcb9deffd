#include "atlasgp/oracles.hpp"
#include "atlasgp/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace atlasgp {

namespace {
constexpr double kPi = std::numbers::pi;

constexpr double kU_r0 = 0.1;
constexpr double kU_r = 0.5;
constexpr double kU_l = 3.0;

struct UCoords {
    double a;
    double d;
};

UCoords ushape_coords(double x, double y)
{
    const double q = kPi * kU_r / 2.0;
    if (x >= 0.0 && y > 0.0)
        return {q + x, y - kU_r};
    if (x >= 0.0)
        return {-q - x, -kU_r - y};
    return {-std::atan(y / x) * kU_r, std::hypot(x, y) - kU_r};
}

} // namespace

double euclidean_heat_sq(int q, double dist_sq, double t)
{
    if (!(t > 0.0))
        throw PreconditionError("euclidean_heat: t must be positive");
    return std::pow(2.0 * kPi * t, -0.5 * q) * std::exp(-dist_sq / (2.0 * t));
}

double euclidean_heat(int q, const Vector& s0, const Vector& s, double t)
{
    if (s0.size() != q || s.size() != q)
        throw ShapeError("euclidean_heat: dimension mismatch");
    return euclidean_heat_sq(q, (s - s0).squaredNorm(), t);
}

CircleHeat circle_heat(double dtheta, double t, int k_max)
{
    if (!(t > 0.0))
        throw PreconditionError("circle_heat: t must be positive");
    double s = 0.0;
    for (int k = k_max; k >= 1; --k)
        s += std::exp(-0.5 * k * k * t) * std::cos(k * dtheta);
    CircleHeat out;
    out.value = (1.0 + 2.0 * s) / (2.0 * kPi);
    out.truncation_bound = std::exp(-0.5 * k_max * k_max * t) / (1.0 - std::exp(-k_max * t));
    return out;
}

double circle_heat_wrapped(double dtheta, double t, int m_max)
{
    double s = 0.0;
    for (int m = -m_max; m <= m_max; ++m) {
        double d = dtheta + 2.0 * kPi * m;
        s += euclidean_heat_sq(1, d * d, t);
    }
    return s;
}

Vector torus_embed(double theta, double phi, double R, double r)
{
    double rad = R + r * std::cos(theta);
    Vector s(3);
    s << rad * std::cos(phi), rad * std::sin(phi), r * std::sin(theta);
    return s;
}

Matrix torus_metric(double theta, double R, double r)
{
    double rad = R + r * std::cos(theta);
    Matrix G = Matrix::Zero(2, 2);
    G(0, 0) = r * r;
    G(1, 1) = rad * rad;
    return G;
}

double torus_theta_drift(double theta, double R, double r)
{
    return -0.5 * std::sin(theta) / (r * (R + r * std::cos(theta)));
}

TorusFixture torus_fixture(int n_theta, int n_phi, double R, double r)
{
    TorusFixture fx;
    fx.R = R;
    fx.r = r;
    const int n = n_theta * n_phi;
    Matrix pts(n, 3);
    fx.angles.resize(n, 2);
    int k = 0;
    for (int i = 0; i < n_theta; ++i)
        for (int j = 0; j < n_phi; ++j, ++k) {
            double th = 2.0 * kPi * i / n_theta;
            double ph = 2.0 * kPi * j / n_phi;
            fx.angles(k, 0) = wrap_angle(th);
            fx.angles(k, 1) = wrap_angle(ph);
            pts.row(k) = torus_embed(th, ph, R, r).transpose();
        }
    fx.cloud = PointCloud(std::move(pts));
    return fx;
}

TorusFixture torus_fixture_irregular(int n_theta, int n_phi, std::uint64_t seed, double jitter,
                                     double R, double r)
{
    TorusFixture fx = torus_fixture(n_theta, n_phi, R, r);
    Rng rng(derive_seed(seed, 0x7475));
    std::uniform_real_distribution<double> u(-jitter, jitter);
    const double dth = 2.0 * kPi / n_theta;
    const double dph = 2.0 * kPi / n_phi;
    for (int k = 0; k < fx.cloud.n(); ++k) {
        double th = wrap_angle(fx.angles(k, 0) + u(rng) * dth);
        double ph = wrap_angle(fx.angles(k, 1) + u(rng) * dph);
        fx.angles(k, 0) = th;
        fx.angles(k, 1) = ph;
        fx.cloud.points.row(k) = torus_embed(th, ph, R, r).transpose();
    }
    return fx;
}

std::vector<IdList> torus_partition(const Matrix& angles, int n_ring, int n_tube)
{
    if (n_ring < 1 || n_tube < 1)
        throw PreconditionError("torus_partition: counts must be positive");
    std::vector<IdList> parts(static_cast<std::size_t>(n_ring * n_tube));
    const double two_pi = 2.0 * kPi;
    for (Eigen::Index k = 0; k < angles.rows(); ++k) {
        double th = std::fmod(angles(k, 0) + kPi / n_tube + 2.0 * two_pi, two_pi);
        double ph = std::fmod(angles(k, 1) + 2.0 * two_pi, two_pi);
        int bt = std::min(n_tube - 1, static_cast<int>(th / (two_pi / n_tube)));
        int br = std::min(n_ring - 1, static_cast<int>(ph / (two_pi / n_ring)));
        parts[static_cast<std::size_t>(br * n_tube + bt)].push_back(static_cast<int>(k));
    }
    return parts;
}

bool ushape_inside(double x, double y)
{
    UCoords c = ushape_coords(x, y);
    const double w = kU_r - kU_r0;
    if (std::abs(c.d) > w)
        return false;
    if (x > kU_l && (x - kU_l) * (x - kU_l) + c.d * c.d > w * w)
        return false;
    return true;
}

double ushape_f(double x, double y)
{
    const double q = kPi * kU_r / 2.0;
    const double b = 6.0 / (q + kU_l + kU_r - kU_r0);
    UCoords c = ushape_coords(x, y);
    return c.a * b + c.d * c.d;
}

UShapeFixture ushape_fixture(double spacing, double x0)
{
    std::vector<std::array<double, 2>> pts;
    const int jmax = static_cast<int>(std::floor(1.0 / spacing));
    for (int i = 0;; ++i) {
        double x = x0 + i * spacing;
        if (x > kU_l + kU_r)
            break;
        for (int j = -jmax; j <= jmax; ++j) {
            double y = j * spacing;
            if (ushape_inside(x, y))
                pts.push_back({x, y});
        }
    }
    UShapeFixture fx;
    Matrix m(static_cast<Eigen::Index>(pts.size()), 2);
    fx.f.resize(m.rows());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        m(static_cast<Eigen::Index>(k), 0) = pts[k][0];
        m(static_cast<Eigen::Index>(k), 1) = pts[k][1];
        fx.f(static_cast<Eigen::Index>(k)) = ushape_f(pts[k][0], pts[k][1]);
    }
    fx.cloud = PointCloud(std::move(m));
    return fx;
}

std::vector<IdList> ushape_partition(const PointCloud& cloud)
{
    const double q = kPi * kU_r / 2.0;
    const double amax = q + kU_l + kU_r - kU_r0;
    std::vector<IdList> parts(4);
    for (int k = 0; k < cloud.n(); ++k) {
        double a = ushape_coords(cloud.points(k, 0), cloud.points(k, 1)).a;
        int b = static_cast<int>(std::floor((a + amax) / (2.0 * amax) * 4.0));
        parts[static_cast<std::size_t>(std::clamp(b, 0, 3))].push_back(k);
    }
    return parts;
}

double torus_f(double theta, double phi)
{
    return std::sin(2.0 * theta) * std::cos(2.0 * phi);
}

HiddenFunction benchmark_function(const std::string& name)
{
    if (name == "torus")
        return [](const Vector& h) { return torus_f(h(0), h(1)); };
    if (name == "ushape")
        return [](const Vector& h) { return ushape_f(h(0), h(1)); };
    throw PreconditionError("unknown benchmark function '" + name + "'");
}

Vector add_noise(const Vector& y, double snr_db, std::uint64_t seed)
{
    if (std::isinf(snr_db) && snr_db > 0)
        return y;
    double mean = y.mean();
    double var = (y.array() - mean).square().mean();
    double sd = std::sqrt(var / std::pow(10.0, snr_db / 10.0));
    Rng rng(derive_seed(seed, 0x6e6f));
    std::normal_distribution<double> z(0.0, 1.0);
    Vector out = y;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) += sd * z(rng);
    return out;
}

CircleFixture circle_fixture(int n)
{
    CircleFixture fx;
    Matrix pts(n, 2);
    fx.angles.resize(n);
    for (int k = 0; k < n; ++k) {
        double a = wrap_angle(2.0 * kPi * k / n);
        fx.angles(k) = a;
        pts(k, 0) = std::cos(a);
        pts(k, 1) = std::sin(a);
    }
    fx.cloud = PointCloud(std::move(pts));
    return fx;
}

Atlas circle_atlas(const CircleFixture& fx, double half_width)
{
    IdList a, b;
    for (int k = 0; k < fx.cloud.n(); ++k) {
        if (std::abs(wrap_angle(fx.angles(k))) < half_width)
            a.push_back(k);
        if (std::abs(wrap_angle(fx.angles(k) - kPi)) < half_width)
            b.push_back(k);
    }
    std::vector<Chart> charts;
    charts.push_back(make_circle_chart(fx.cloud, a, 0.0, half_width));
    charts.push_back(make_circle_chart(fx.cloud, b, kPi, half_width));
    return assemble_atlas(std::move(charts), fx.cloud.n());
}

Atlas torus_analytic_atlas(const TorusFixture& fx)
{
    IdList all(static_cast<std::size_t>(fx.cloud.n()));
    for (int k = 0; k < fx.cloud.n(); ++k)
        all[static_cast<std::size_t>(k)] = k;
    std::vector<Chart> charts;
    charts.push_back(make_torus_chart(fx.cloud, all, fx.R, fx.r));
    return assemble_atlas(std::move(charts), fx.cloud.n());
}

PointCloud square_grid(int m, double half)
{
    Matrix pts(m * m, 2);
    int k = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j, ++k) {
            pts(k, 0) = -half + 2.0 * half * i / (m - 1);
            pts(k, 1) = -half + 2.0 * half * j / (m - 1);
        }
    return PointCloud(std::move(pts));
}

} // namespace atlasgp
