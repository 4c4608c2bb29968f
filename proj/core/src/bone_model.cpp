#include "cortexfit/bone_model.hpp"

#include <cmath>

namespace cortexfit {

void BoneModelParams::validate() const {
  for (const DensityPrior* p : {&soft_tissue, &cortical, &trabecular}) {
    if (!(p->sd > 0.0)) throw Error("bone model: density sd must be > 0");
    if (!std::isfinite(p->mean)) throw Error("bone model: density mean must be finite");
  }
  if (!(half_width.log_sd > 0.0)) throw Error("bone model: half-width log_sd must be > 0");
  if (!std::isfinite(half_width.log_mean))
    throw Error("bone model: half-width log_mean must be finite");
  if (!(cortical.mean > trabecular.mean && trabecular.mean > soft_tissue.mean))
    throw Error("bone model: require cortical.mean > trabecular.mean > soft_tissue.mean");
}

BoneModelParams default_bone_model() {
  BoneModelParams p;
  p.soft_tissue = {0.0, 30.0};
  p.cortical = {1000.0, 150.0};
  p.trabecular = {100.0, 50.0};
  p.half_width = {std::log(0.175), 0.3};
  return p;
}

RegionParams default_region_params() {
  RegionParams params;
  params[RegionLabel::VerticalCortex] = default_bone_model();
  params[RegionLabel::Endplates] = default_bone_model();
  params[RegionLabel::Foramen] = default_bone_model();
  return params;
}

double realize_profile(double y0, double y1, double y2, double w, double t) {
  if (!(w > 0.0)) throw Error("realize_profile: half-width must be > 0");
  const auto heaviside = [](double u) { return u >= 0.0 ? 1.0 : 0.0; };
  return y0 + (y1 - y0) * heaviside(t + w) + (y2 - y1) * heaviside(t - w);
}

}  // namespace cortexfit
