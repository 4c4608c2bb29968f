#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "cortexfit/measurement_model.hpp"
#include "cortexfit/types.hpp"
#include "cortexfit/volume.hpp"

namespace cortexfit {

/// Analytic cylinder phantom with a cortical shell of known geometry: lateral
/// wall of the given thickness plus endplate slabs, axis z, centered at the
/// origin. The exactly known cortex-center surfaces are the cylinder of
/// radius center_radius() and the planes at +-plane_offset().
struct PhantomSpec {
  double diameter = 36.0;   // mm
  double height = 25.0;     // mm
  double wall = 1.0;        // lateral wall thickness, mm
  double endplate = 1.0;    // endplate slab thickness, mm
  double cortical = 1000.0; // mg/cc
  double trabecular = 100.0;
  double background = 0.0;
  int supersampling = 2;    // sub-samples per voxel axis during rasterization
  double noise_sd = 0.0;    // mg/cc, applied by simulate_scan

  /// Named presets low/medium/high: walls 0.5/1.0/1.5 mm, endplates 1/1/2 mm.
  static PhantomSpec preset(const std::string& name);

  double outer_radius() const { return 0.5 * diameter; }
  double center_radius() const { return outer_radius() - 0.5 * wall; }
  double plane_offset() const { return 0.5 * height - 0.5 * endplate; }

  void validate() const;
};

/// Piecewise-constant density at a world point.
double phantom_density(const PhantomSpec& spec, const Vec3& p);

/// Box-averaged voxel value: the mean of supersampling^3 analytic evaluations
/// across the voxel cell.
double rasterized_voxel_value(const PhantomSpec& spec, const Vec3& center,
                              const std::array<double, 3>& spacing);

/// Rasterizes the phantom on an isotropic fine grid centered at the origin,
/// extending `margin` mm beyond the phantom in every direction.
/// Requires fine_spacing <= wall/4.
CalibratedVolume rasterize(const PhantomSpec& spec, double fine_spacing, double margin = 5.0,
                           int threads = 0);

/// Simulates the scanner: separable convolution with the unit-integral
/// in-plane Gaussian along x and y and the out-of-plane kernel (width =
/// out-of-plane spacing) along z on the fine grid, point-sampled at the
/// coarse grid, plus seeded Gaussian noise generated in voxel index order.
/// The coarse grid covers the fine volume shrunk by the kernel supports.
CalibratedVolume simulate_scan(const CalibratedVolume& fine, const ScannerConfig& scanner,
                               const std::array<double, 3>& out_spacing, double noise_sd,
                               std::uint64_t seed, int threads = 0);

/// Analytic ground truth emitted next to generated phantoms.
struct PhantomTruth {
  double center_radius = 0.0;
  double plane_offset = 0.0;
  double outer_radius = 0.0;
  double height = 0.0;
  double wall = 0.0;
  double endplate = 0.0;
  double cortical = 0.0;
  double trabecular = 0.0;
  double background = 0.0;
};

void write_ground_truth(const PhantomSpec& spec, const std::filesystem::path& path);
PhantomTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace cortexfit
