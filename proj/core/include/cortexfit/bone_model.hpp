#pragma once

#include <map>

#include "cortexfit/types.hpp"

namespace cortexfit {

/// Gaussian prior for one density plateau (mg/cc).
struct DensityPrior {
  double mean = 0.0;
  double sd = 1.0;
};

/// Log-normal prior for the cortical half-width: log W ~ N(log_mean, log_sd^2).
/// The cortical thickness is 2*W.
struct WidthPrior {
  double log_mean = 0.0;  // log-mm
  double log_sd = 1.0;    // dimensionless
};

/// Priors of the three density plateaus (soft tissue, cortex, trabecular bone)
/// and the half-width, for one anatomical region.
struct BoneModelParams {
  DensityPrior soft_tissue;  // Y0, outside the bone
  DensityPrior cortical;     // Y1, the shell
  DensityPrior trabecular;   // Y2, inside the bone
  WidthPrior half_width;     // W

  void validate() const;
};

using RegionParams = std::map<RegionLabel, BoneModelParams>;

/// Default parameter set: soft tissue (0, 30), cortex (1000, 150), trabecular
/// (100, 50) mg/cc, half-width log-normal(ln 0.175, 0.3) so the mean thickness
/// sits in the 0.25-0.4 mm band reported for vertebral cortices.
BoneModelParams default_bone_model();

/// default_bone_model() for every modeled region (all but CutPedicles).
RegionParams default_region_params();

/// Deterministic realization of the plateau profile at signed distance t (mm)
/// from the cortex center: y0 left of -w, y1 between -w and w, y2 right of w.
/// At t = +-w the plateau to the right of the jump applies (H(0) = 1).
double realize_profile(double y0, double y1, double y2, double w, double t);

}  // namespace cortexfit
