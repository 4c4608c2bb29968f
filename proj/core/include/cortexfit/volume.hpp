#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "cortexfit/types.hpp"

namespace cortexfit {

/// Calibrated volumetric image: a dense grid of BMD values (mg/cc) with
/// anisotropic spacing. A voxel's value sits at its center;
/// world = origin + index * spacing per axis. Immutable after construction,
/// so concurrent reads are safe.
class CalibratedVolume {
 public:
  CalibratedVolume(std::array<int, 3> dims, std::array<double, 3> spacing_mm,
                   std::array<double, 3> origin_mm, std::vector<float> voxels);

  const std::array<int, 3>& dims() const { return dims_; }
  const std::array<double, 3>& spacing() const { return spacing_; }
  const std::array<double, 3>& origin() const { return origin_; }
  std::size_t voxel_count() const { return voxels_.size(); }
  const std::vector<float>& voxels() const { return voxels_; }

  /// x varies fastest, then y, then z.
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims_[1]) * iz);
  }
  float at(int ix, int iy, int iz) const { return voxels_[index(ix, iy, iz)]; }

  Vec3 voxel_center(int ix, int iy, int iz) const {
    return {origin_[0] + ix * spacing_[0], origin_[1] + iy * spacing_[1],
            origin_[2] + iz * spacing_[2]};
  }

  /// Trilinear interpolation of the 8 surrounding voxels. Absent when p lies
  /// outside the bounding box of voxel centers; no clamping, no extrapolation.
  std::optional<double> sample_trilinear(const Vec3& p) const;

 private:
  std::array<int, 3> dims_;
  std::array<double, 3> spacing_;
  std::array<double, 3> origin_;
  std::vector<float> voxels_;
};

std::optional<double> sample_trilinear(const CalibratedVolume& vol, const Vec3& p);

/// Applies the HU -> BMD linear calibration: every voxel becomes slope*v + intercept.
CalibratedVolume calibrate(const CalibratedVolume& raw, double slope, double intercept);

/// Volume files: a text header (`dims`, `spacing`, `origin`, `data`) plus a
/// raw little-endian float32 payload, x varying fastest, then y, then z.
CalibratedVolume read_volume(const std::filesystem::path& header_path);

/// Writes the header at `header_path` and the payload next to it
/// (header file name + ".raw").
void write_volume(const CalibratedVolume& vol, const std::filesystem::path& header_path);

}  // namespace cortexfit
