#pragma once

#include "atlasgp/atlas.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace atlasgp {

double euclidean_heat(int q, const Vector& s0, const Vector& s, double t);
double euclidean_heat_sq(int q, double dist_sq, double t);

struct CircleHeat {
    double value = 0.0;
    double truncation_bound = 0.0;
};

CircleHeat circle_heat(double dtheta, double t, int k_max = 20);
/// Sum of Gaussians over the images dtheta + 2 pi m, |m| <= m_max.
double circle_heat_wrapped(double dtheta, double t, int m_max = 50);

struct TorusFixture {
    PointCloud cloud;
    Matrix angles; // theta (tube), phi (ring)
    double R = 2.0;
    double r = 1.3;
};

Vector torus_embed(double theta, double phi, double R = 2.0, double r = 1.3);
Matrix torus_metric(double theta, double R = 2.0, double r = 1.3);
/// Tube-angle drift of the analytic torus SDE.
double torus_theta_drift(double theta, double R = 2.0, double r = 1.3);

TorusFixture torus_fixture(int n_theta = 25, int n_phi = 25, double R = 2.0, double r = 1.3);
/// Regular grid with seeded uniform angle jitter of +-jitter grid spacings.
TorusFixture torus_fixture_irregular(int n_theta, int n_phi, std::uint64_t seed, double jitter = 0.35,
                                     double R = 2.0, double r = 1.3);

/// n_ring sectors in phi times n_tube bands in theta (first band centred on theta = 0).
std::vector<IdList> torus_partition(const Matrix& angles, int n_ring, int n_tube);

struct UShapeFixture {
    PointCloud cloud;
    Vector f;
};

bool ushape_inside(double x, double y);
double ushape_f(double x, double y);
UShapeFixture ushape_fixture(double spacing = 0.1375, double x0 = -0.915);
/// Four subsets along the U: lower arm, two bend halves joined to arm ends, upper arm.
std::vector<IdList> ushape_partition(const PointCloud& cloud);

double torus_f(double theta, double phi);

using HiddenFunction = std::function<double(const Vector&)>;
HiddenFunction benchmark_function(const std::string& name);

Vector add_noise(const Vector& y, double snr_db, std::uint64_t seed);

struct CircleFixture {
    PointCloud cloud;
    Vector angles;
};

CircleFixture circle_fixture(int n);
/// Two analytic angle charts offset by pi.
Atlas circle_atlas(const CircleFixture& fx, double half_width = 0.75 * 3.141592653589793);
Atlas torus_analytic_atlas(const TorusFixture& fx);

/// Regular m x m grid on [-half, half]^2.
PointCloud square_grid(int m, double half);

} // namespace atlasgp
