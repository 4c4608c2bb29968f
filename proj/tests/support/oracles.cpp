#include "support/oracles.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <map>
#include <numbers>

#include "cortexfit/measurement_model.hpp"
#include "cortexfit/numerics.hpp"
#include "cortexfit/rng.hpp"

namespace cortexfit::testing {

double trapezoid_integral(const std::function<double(double)>& f, double a, double b, int n) {
  const double step = (b - a) / (n - 1);
  double acc = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n - 1; ++i) acc += f(a + i * step);
  return acc * step;
}

double simpson_integral(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 == 0) ++n;  // Simpson needs an odd node count
  const double step = (b - a) / (n - 1);
  double acc = f(a) + f(b);
  for (int i = 1; i < n - 1; ++i) acc += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
  return acc * step / 3.0;
}

double oblique_step_response(double t, double theta_deg, double sigma, double h,
                             int quadrature_points) {
  const double s = std::sin(deg_to_rad(theta_deg));
  const double c = std::cos(deg_to_rad(theta_deg));
  // Inner tau integral of the step against the Gaussian is the normal CDF;
  // the remaining lambda integral runs over the out-of-plane support.
  const auto integrand = [&](double lambda) {
    return out_of_plane_psf(lambda, h) * normal_cdf((t - lambda * c) / (sigma * s));
  };
  return simpson_integral(integrand, -h, h, quadrature_points);
}

Mat3 random_rotation(std::mt19937_64& rng) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  const double u3 = uniform_unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qx = a * std::sin(2.0 * std::numbers::pi * u2);
  const double qy = a * std::cos(2.0 * std::numbers::pi * u2);
  const double qz = b * std::sin(2.0 * std::numbers::pi * u3);
  const double qw = b * std::cos(2.0 * std::numbers::pi * u3);
  Eigen::Quaterniond q(qw, qx, qy, qz);
  return q.normalized().toRotationMatrix();
}

namespace {

LabeledSurfaceMesh finish(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles) {
  LabeledSurfaceMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  mesh.labels.assign(mesh.vertices.size(), RegionLabel::VerticalCortex);
  mesh.validate();
  return mesh;
}

}  // namespace

LabeledSurfaceMesh make_tetrahedron(double scale) {
  return finish({{scale, scale, scale},
                 {scale, -scale, -scale},
                 {-scale, scale, -scale},
                 {-scale, -scale, scale}},
                {{1, 3, 2}, {0, 2, 3}, {0, 3, 1}, {0, 1, 2}});
}

LabeledSurfaceMesh make_icosahedron(double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> vertices = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (Vec3& v : vertices) v *= radius / v.norm();
  const std::vector<std::array<int, 3>> triangles = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  return finish(std::move(vertices), triangles);
}

LabeledSurfaceMesh make_icosphere(double radius, int subdivisions) {
  LabeledSurfaceMesh mesh = make_icosahedron(radius);
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    const auto midpoint_index = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
      m *= radius / m.norm();
      mesh.vertices.push_back(m);
      const int index = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, index);
      return index;
    };

    std::vector<std::array<int, 3>> refined;
    refined.reserve(mesh.triangles.size() * 4);
    for (const auto& [a, b, c] : mesh.triangles) {
      const int ab = midpoint_index(a, b);
      const int bc = midpoint_index(b, c);
      const int ca = midpoint_index(c, a);
      refined.push_back({a, ab, ca});
      refined.push_back({b, bc, ab});
      refined.push_back({c, ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(refined);
  }
  mesh.labels.assign(mesh.vertices.size(), RegionLabel::VerticalCortex);
  mesh.validate();
  return mesh;
}

LabeledSurfaceMesh make_cube(double edge) {
  const double s = 0.5 * edge;
  return finish(
      {{-s, -s, -s}, {s, -s, -s}, {s, s, -s}, {-s, s, -s},
       {-s, -s, s},  {s, -s, s},  {s, s, s},  {-s, s, s}},
      {{0, 3, 2}, {0, 2, 1}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
       {3, 7, 6}, {3, 6, 2}, {0, 4, 7}, {0, 7, 3}, {1, 2, 6}, {1, 6, 5}});
}

}  // namespace cortexfit::testing
