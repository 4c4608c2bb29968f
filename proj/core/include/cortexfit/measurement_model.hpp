#pragma once

#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "cortexfit/bone_model.hpp"
#include "cortexfit/numerics.hpp"
#include "cortexfit/types.hpp"

namespace cortexfit {

struct ScannerConfig {
  double slice_width = 0.0;    // h, mm
  double in_plane_sigma = 0.0; // sigma, mm

  void validate() const;
  bool operator==(const ScannerConfig&) const = default;
};

/// Out-of-plane PSF (slice sensitivity profile): rectangle convolved with the
/// triangular table-movement function, scaled to slice width h and normalized
/// to unit integral. Support is |z| <= h; peak value 1/h at z = 0.
double out_of_plane_psf(double z, double h);

/// In-plane PSF restricted to a line through the origin: the unit-integral 1D
/// Gaussian of standard deviation sigma.
double in_plane_psf(double r, double sigma);

/// Primitive function G_theta of the angle-dependent combined PSF
/// g_theta = (1/sin t) g_I(./sin t) * (1/cos t) g_O,h(./cos t), tabulated on a
/// uniform grid covering the full support. Non-decreasing from 0 to 1.
class CombinedPsfCdf {
 public:
  static CombinedPsfCdf build(const ScannerConfig& scanner, double theta_deg);

  double theta_deg() const { return theta_deg_; }
  /// Clamped linear interpolation: 0 left of the grid, 1 right of it.
  double operator()(double t) const;

  double grid_min() const { return t_min_; }
  double grid_step() const { return step_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double theta_deg_ = 0.0;
  double t_min_ = 0.0;
  double step_ = 0.0;
  std::vector<double> values_;
};

CombinedPsfCdf combined_psf_cdf(const ScannerConfig& scanner, double theta_deg);

/// Mean and variance of the conditional measurement process zeta(t) = Z(t)|W=w.
std::pair<double, double> conditional_moments(const BoneModelParams& params,
                                              const CombinedPsfCdf& cdf, double t, double w);

/// Gaussian density of the conditional measurement at value z.
double conditional_density(double z, double t, double w, const BoneModelParams& params,
                           const CombinedPsfCdf& cdf);

/// f_Z(z, t) for one fixed t: the half-width marginalized out by fixed-order
/// Gauss-Legendre quadrature in u = log w over +-4 log-sd, which turns the
/// log-normal weight into a Gaussian and cancels the 1/w Jacobian. The result
/// is a mixture of `order` Gaussians in z.
class MarginalDensity {
 public:
  MarginalDensity(const BoneModelParams& params, const CombinedPsfCdf& cdf, double t,
                  int quad_order = 64);

  double operator()(double z) const;

 private:
  struct Component {
    double weight;
    double mean;
    double sd;
  };
  std::vector<Component> components_;
};

double marginal_density(double z, double t, const BoneModelParams& params,
                        const CombinedPsfCdf& cdf, int quad_order = 64);

/// Uniformly sampled axis descriptor for the lookup table.
struct AxisSpec {
  double min = 0.0;
  double max = 0.0;
  int count = 0;

  double step() const { return (max - min) / (count - 1); }
  double value(int i) const { return min + i * step(); }
  void validate(const char* name) const;
};

struct TableAxes {
  AxisSpec t{-2.0, 2.0, 41};         // mm
  AxisSpec theta{0.0, 90.0, 91};     // degrees
  AxisSpec z{-1000.0, 2000.0, 3001}; // mg/cc

  void validate() const;
};

/// Precomputed grid of f_Z(z, t) per profile angle and per region, with
/// trilinear lookup. Values are stored t-fastest, then theta, then z.
/// Immutable once built; lookups are re-entrant.
class MeasurementModelTable {
 public:
  static MeasurementModelTable build(const ScannerConfig& scanner, const RegionParams& params,
                                     const TableAxes& axes = TableAxes{}, int quad_order = 64,
                                     int threads = 0);

  const ScannerConfig& scanner() const { return scanner_; }
  const TableAxes& axes() const { return axes_; }
  int quadrature_order() const { return quad_order_; }
  bool has_region(RegionLabel region) const { return data_.count(region) != 0; }
  std::vector<RegionLabel> regions() const;
  const std::vector<float>& region_data(RegionLabel region) const;

  /// Trilinear interpolation over the (t, theta, z) grid; arguments outside an
  /// axis range are clamped to its boundary.
  double lookup(RegionLabel region, double t, double theta_deg, double z) const;

  /// Cached region pointer for hot loops; semantics identical to lookup().
  class View {
   public:
    View(const MeasurementModelTable& table, RegionLabel region)
        : axes_(&table.axes_), data_(table.region_data(region).data()) {}
    double operator()(double t, double theta_deg, double z) const;

   private:
    const TableAxes* axes_;
    const float* data_;
  };
  View view(RegionLabel region) const { return View(*this, region); }

  void write(const std::filesystem::path& path) const;
  static MeasurementModelTable read(const std::filesystem::path& path);

 private:
  ScannerConfig scanner_;
  TableAxes axes_;
  int quad_order_ = 64;
  std::map<RegionLabel, std::vector<float>> data_;

  friend class View;
};

}  // namespace cortexfit
