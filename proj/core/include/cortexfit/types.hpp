#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cortexfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised for invalid data, malformed files and violated preconditions.
/// The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anatomical regions of a labeled template. Each modeled region has its own
/// bone model parameterization; CutPedicles carries no bone model and is
/// excluded from fitting.
enum class RegionLabel : std::uint8_t {
  VerticalCortex = 0,
  Endplates = 1,
  Foramen = 2,
  CutPedicles = 3,
};

inline constexpr int kRegionCount = 4;

inline const char* to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::VerticalCortex: return "VerticalCortex";
    case RegionLabel::Endplates: return "Endplates";
    case RegionLabel::Foramen: return "Foramen";
    case RegionLabel::CutPedicles: return "CutPedicles";
  }
  throw Error("invalid RegionLabel value");
}

inline RegionLabel region_from_string(const std::string& token) {
  if (token == "VerticalCortex") return RegionLabel::VerticalCortex;
  if (token == "Endplates") return RegionLabel::Endplates;
  if (token == "Foramen") return RegionLabel::Foramen;
  if (token == "CutPedicles") return RegionLabel::CutPedicles;
  throw Error("unknown region label '" + token + "'");
}

/// True for every region that carries a bone model (everything but CutPedicles).
inline bool region_is_modeled(RegionLabel label) {
  return label != RegionLabel::CutPedicles;
}

}  // namespace cortexfit
