#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cortexfit/mesh.hpp"
#include "cortexfit/types.hpp"

namespace cortexfit {

/// Random points on a mesh surface with their source triangle and the
/// triangle's region label.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<int> triangle;
  std::vector<RegionLabel> labels;

  std::size_t size() const { return points.size(); }
};

/// Area-proportional triangle selection with uniform barycentric placement;
/// bit-reproducible for a fixed seed. A triangle's label is the majority vote
/// of its vertex labels (ties resolve to the first vertex).
SurfaceSamples sample_surface(const LabeledSurfaceMesh& mesh, std::size_t n, std::uint64_t seed);

struct CylinderFit {
  Vec3 axis_point = Vec3::Zero();
  Vec3 axis_direction = Vec3::UnitZ();
  double radius = 0.0;
  std::vector<double> point_radii;  // distance of each input point to the axis
  int iterations = 0;
};

/// Least-squares cylinder via Gauss-Newton on point-to-axis distance
/// residuals, initialized from the covariance eigenvector with the smallest
/// initial residual. Needs >= 6 points, not all collinear.
CylinderFit fit_cylinder(const std::vector<Vec3>& points);

struct ParallelPlanesFit {
  Vec3 normal = Vec3::UnitZ();  // shared unit normal, oriented upper above lower
  double upper_offset = 0.0;    // plane: normal . x = offset
  double lower_offset = 0.0;
  std::vector<double> upper_to_lower;  // distance of each upper point to the lower plane
  std::vector<double> lower_to_upper;
};

/// Least-squares pair of planes constrained to one shared normal.
ParallelPlanesFit fit_parallel_planes(const std::vector<Vec3>& upper,
                                      const std::vector<Vec3>& lower);

/// Signed distance to a closed mesh: unsigned minimum over exact
/// point-triangle distances, negative inside (winding number test).
double point_to_mesh_distance(const Vec3& point, const LabeledSurfaceMesh& mesh);

/// The high-resolution threshold oracle: binarize at `threshold`, apply a 1D
/// morphological closing of the given radius (samples), locate the first
/// rising edge and the following falling edge, and return the midpoint offset
/// relative to the profile center. The profile must be ordered outside ->
/// inside. Absent when no such edge pair exists (cortex not identifiable).
std::optional<double> cortex_center_from_highres(std::span<const double> profile, double spacing,
                                                 double threshold, int closing_radius);

struct AccuracyReport {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;    // sample SD, n-1 denominator
  double diff = 0.0;  // mean - truth
  double q25_abs = 0.0;
  double q50_abs = 0.0;
  double q75_abs = 0.0;
};

/// Mean, sample SD, difference to truth and absolute-error quantiles.
AccuracyReport accuracy_report(std::span<const double> values, double truth);

}  // namespace cortexfit
