#include "cortexfit/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "cortexfit/rng.hpp"

namespace cortexfit {

SurfaceSamples sample_surface(const LabeledSurfaceMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("sample_surface: need at least one sample");
  mesh.validate();

  std::vector<double> cumulative(mesh.triangles.size());
  std::vector<RegionLabel> tri_labels(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& [a, b, c] = mesh.triangles[t];
    total += 0.5 * (mesh.vertices[b] - mesh.vertices[a])
                       .cross(mesh.vertices[c] - mesh.vertices[a])
                       .norm();
    cumulative[t] = total;

    const RegionLabel la = mesh.labels[a], lb = mesh.labels[b], lc = mesh.labels[c];
    tri_labels[t] = la;
    if (lb == lc) tri_labels[t] = lb;  // majority; three distinct fall back to la
  }

  SurfaceSamples samples;
  samples.points.reserve(n);
  samples.triangle.reserve(n);
  samples.labels.reserve(n);
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = uniform_unit(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const int t = static_cast<int>(std::min<std::size_t>(it - cumulative.begin(),
                                                         mesh.triangles.size() - 1));
    const double r1 = uniform_unit(rng);
    const double r2 = uniform_unit(rng);
    const double sq = std::sqrt(r1);
    const double b0 = 1.0 - sq;
    const double b1 = sq * (1.0 - r2);
    const double b2 = sq * r2;
    const auto& [a, b, c] = mesh.triangles[t];
    samples.points.push_back(b0 * mesh.vertices[a] + b1 * mesh.vertices[b] +
                             b2 * mesh.vertices[c]);
    samples.triangle.push_back(t);
    samples.labels.push_back(tri_labels[t]);
  }
  return samples;
}

namespace {

struct CylinderGeometry {
  Vec3 center;
  Vec3 axis;  // unit
};

double residual_sum_squares(const std::vector<Vec3>& points, const CylinderGeometry& geom) {
  double mean = 0.0;
  std::vector<double> d(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = points[i] - geom.center;
    d[i] = (q - q.dot(geom.axis) * geom.axis).norm();
    mean += d[i];
  }
  mean /= points.size();
  double rss = 0.0;
  for (const double di : d) rss += (di - mean) * (di - mean);
  return rss;
}

}  // namespace

CylinderFit fit_cylinder(const std::vector<Vec3>& points) {
  if (points.size() < 6) throw Error("fit_cylinder: need at least 6 points");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 q = p - centroid;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  if (eig.info() != Eigen::Success) throw Error("fit_cylinder: eigen decomposition failed");
  if (eig.eigenvalues()(1) <= 1e-12 * std::max(eig.eigenvalues()(2), 1.0))
    throw Error("fit_cylinder: degenerate configuration (points nearly collinear)");

  CylinderGeometry geom{centroid, Vec3::UnitZ()};
  double best_rss = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const CylinderGeometry candidate{centroid, eig.eigenvectors().col(k).normalized()};
    const double rss = residual_sum_squares(points, candidate);
    if (rss < best_rss) {
      best_rss = rss;
      geom = candidate;
    }
  }

  double radius = 0.0;
  {
    double acc = 0.0;
    for (const Vec3& p : points) {
      const Vec3 q = p - geom.center;
      acc += (q - q.dot(geom.axis) * geom.axis).norm();
    }
    radius = acc / points.size();
  }

  CylinderFit fit;
  const double scale = std::sqrt(best_rss / points.size() + radius * radius);
  constexpr int kMaxIterations = 100;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    // Reduced 5-dof parameterization: center and axis updates restricted to
    // the plane orthogonal to the current axis (the other directions are
    // gauge freedoms of a cylinder).
    Vec3 e1 = geom.axis.unitOrthogonal();
    Vec3 e2 = geom.axis.cross(e1);

    Eigen::Matrix<double, 5, 5> JtJ = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> Jtr = Eigen::Matrix<double, 5, 1>::Zero();
    for (const Vec3& p : points) {
      const Vec3 q = p - geom.center;
      const double t = q.dot(geom.axis);
      const Vec3 u = q - t * geom.axis;
      const double d = u.norm();
      if (!(d > 1e-12)) throw Error("fit_cylinder: degenerate configuration (point on axis)");
      const Vec3 uh = u / d;

      Eigen::Matrix<double, 5, 1> row;
      row << -uh.dot(e1), -uh.dot(e2), -t * uh.dot(e1), -t * uh.dot(e2), -1.0;
      const double res = d - radius;
      JtJ += row * row.transpose();
      Jtr += row * res;
    }

    const Eigen::Matrix<double, 5, 1> delta = JtJ.ldlt().solve(-Jtr);
    if (!delta.allFinite()) throw Error("fit_cylinder: degenerate normal equations");
    geom.center += delta(0) * e1 + delta(1) * e2;
    geom.axis = (geom.axis + delta(2) * e1 + delta(3) * e2).normalized();
    radius += delta(4);
    if (delta.norm() < 1e-12 * scale) break;
  }
  if (iter == kMaxIterations)
    throw Error("fit_cylinder: no convergence after 100 iterations");

  fit.axis_point = geom.center;
  fit.axis_direction = geom.axis;
  fit.radius = radius;
  fit.iterations = iter + 1;
  fit.point_radii.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = points[i] - geom.center;
    fit.point_radii[i] = (q - q.dot(geom.axis) * geom.axis).norm();
  }
  return fit;
}

ParallelPlanesFit fit_parallel_planes(const std::vector<Vec3>& upper,
                                      const std::vector<Vec3>& lower) {
  if (upper.size() < 3 || lower.size() < 3)
    throw Error("fit_parallel_planes: need at least 3 points per plane");

  Vec3 cu = Vec3::Zero(), cl = Vec3::Zero();
  for (const Vec3& p : upper) cu += p;
  cu /= static_cast<double>(upper.size());
  for (const Vec3& p : lower) cl += p;
  cl /= static_cast<double>(lower.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : upper) {
    const Vec3 q = p - cu;
    scatter += q * q.transpose();
  }
  for (const Vec3& p : lower) {
    const Vec3 q = p - cl;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  if (eig.info() != Eigen::Success)
    throw Error("fit_parallel_planes: eigen decomposition failed");
  if (eig.eigenvalues()(1) <= 1e-12 * std::max(eig.eigenvalues()(2), 1.0))
    throw Error("fit_parallel_planes: degenerate (rank < 2) point sets");

  ParallelPlanesFit fit;
  fit.normal = eig.eigenvectors().col(0).normalized();
  if (fit.normal.dot(cu - cl) < 0.0) fit.normal = -fit.normal;
  fit.upper_offset = fit.normal.dot(cu);
  fit.lower_offset = fit.normal.dot(cl);

  fit.upper_to_lower.reserve(upper.size());
  for (const Vec3& p : upper)
    fit.upper_to_lower.push_back(std::abs(fit.normal.dot(p) - fit.lower_offset));
  fit.lower_to_upper.reserve(lower.size());
  for (const Vec3& p : lower)
    fit.lower_to_upper.push_back(std::abs(fit.normal.dot(p) - fit.upper_offset));
  return fit;
}

namespace {

// Ericson-style closest point on a triangle.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Solid angle of a triangle as seen from p (van Oosterom-Strackee).
double triangle_solid_angle(const Vec3& p, const Vec3& va, const Vec3& vb, const Vec3& vc) {
  const Vec3 a = va - p, b = vb - p, c = vc - p;
  const double la = a.norm(), lb = b.norm(), lc = c.norm();
  const double numer = a.dot(b.cross(c));
  const double denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
  return 2.0 * std::atan2(numer, denom);
}

}  // namespace

double point_to_mesh_distance(const Vec3& point, const LabeledSurfaceMesh& mesh) {
  double best_sq = std::numeric_limits<double>::infinity();
  double winding = 0.0;
  for (const auto& [a, b, c] : mesh.triangles) {
    const Vec3 q = closest_point_on_triangle(point, mesh.vertices[a], mesh.vertices[b],
                                             mesh.vertices[c]);
    best_sq = std::min(best_sq, (q - point).squaredNorm());
    winding += triangle_solid_angle(point, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
  }
  const double distance = std::sqrt(best_sq);
  const bool inside = winding / (4.0 * std::numbers::pi) > 0.5;
  return inside ? -distance : distance;
}

std::optional<double> cortex_center_from_highres(std::span<const double> profile, double spacing,
                                                 double threshold, int closing_radius) {
  if (!(spacing > 0.0)) throw Error("cortex_center_from_highres: spacing must be > 0");
  if (closing_radius < 0) throw Error("cortex_center_from_highres: closing radius must be >= 0");
  const int n = static_cast<int>(profile.size());
  if (n < 2) return std::nullopt;

  std::vector<char> bin(n);
  for (int i = 0; i < n; ++i) bin[i] = profile[i] >= threshold ? 1 : 0;

  if (closing_radius > 0) {
    std::vector<char> dilated(n);
    for (int i = 0; i < n; ++i) {
      char v = 0;
      for (int k = std::max(0, i - closing_radius);
           k <= std::min(n - 1, i + closing_radius) && !v; ++k)
        v = bin[k];
      dilated[i] = v;
    }
    for (int i = 0; i < n; ++i) {
      char v = 1;
      for (int k = std::max(0, i - closing_radius);
           k <= std::min(n - 1, i + closing_radius) && v; ++k)
        v = dilated[k];
      bin[i] = v;
    }
  }

  int rising = -1;
  for (int i = 1; i < n; ++i)
    if (bin[i] && !bin[i - 1]) {
      rising = i;
      break;
    }
  if (rising < 0) return std::nullopt;
  int falling = -1;
  for (int i = rising + 1; i < n; ++i)
    if (!bin[i] && bin[i - 1]) {
      falling = i;
      break;
    }
  if (falling < 0) return std::nullopt;

  const auto offset = [&](int i) { return (i - 0.5 * (n - 1)) * spacing; };
  const double periosteal = 0.5 * (offset(rising - 1) + offset(rising));
  const double endosteal = 0.5 * (offset(falling - 1) + offset(falling));
  return 0.5 * (periosteal + endosteal);
}

AccuracyReport accuracy_report(std::span<const double> values, double truth) {
  if (values.empty()) throw Error("accuracy_report: empty sample set");
  AccuracyReport report;
  report.n = values.size();

  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  report.mean = mean;
  report.diff = mean - truth;

  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  report.sd = values.size() > 1 ? std::sqrt(ss / (static_cast<double>(values.size()) - 1.0)) : 0.0;

  std::vector<double> abs_err(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) abs_err[i] = std::abs(values[i] - truth);
  std::sort(abs_err.begin(), abs_err.end());
  const auto quantile = [&](double p) {
    const double pos = p * (static_cast<double>(abs_err.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= abs_err.size()) return abs_err.back();
    return abs_err[lo] + frac * (abs_err[lo + 1] - abs_err[lo]);
  };
  report.q25_abs = quantile(0.25);
  report.q50_abs = quantile(0.50);
  report.q75_abs = quantile(0.75);
  return report;
}

}  // namespace cortexfit
