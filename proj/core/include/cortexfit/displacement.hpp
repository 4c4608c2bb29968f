#pragma once

#include <vector>

#include "cortexfit/measurement_model.hpp"
#include "cortexfit/mesh.hpp"
#include "cortexfit/types.hpp"
#include "cortexfit/volume.hpp"

namespace cortexfit {

/// Symmetric sampling grid for 1D profiles: 2K+1 offsets covering
/// [-t0, t0] with step t0/K; offset K is exactly 0.
struct ProfileGrid {
  double half_extent = 2.0;  // t0, mm
  int samples_per_side = 20; // K

  int count() const { return 2 * samples_per_side + 1; }
  double step() const { return half_extent / samples_per_side; }
  double offset(int j) const { return (j - samples_per_side) * step(); }
  void validate() const;
};

/// Densities sampled along one vertex's profile line. The direction is the
/// inward normal, so negative offsets lie in soft tissue and positive offsets
/// in trabecular bone; theta is the angle between the profile direction and
/// the scanner z-axis, folded into [0, 90] degrees. A profile with any
/// out-of-bounds sample is invalid as a whole.
struct Profile {
  std::vector<double> values;  // mg/cc, one per grid offset
  Vec3 direction = Vec3::Zero();
  double theta_deg = 0.0;
  bool valid = false;
};

/// Samples the volume at x_i + t_j * d_i for every vertex (d_i = inward
/// normal). CutPedicles vertices get an invalid profile without sampling.
std::vector<Profile> sample_profiles(const LabeledSurfaceMesh& mesh,
                                     const CalibratedVolume& volume, const ProfileGrid& grid,
                                     int threads = 0);

/// Log likelihood of the profile under the measurement model re-centered at
/// shift s: sum_j log f_Z(rho_j, t_j - s, theta). Lookup results are floored
/// at 1e-12 before the log.
double profile_log_likelihood(const Profile& profile, const MeasurementModelTable& table,
                              RegionLabel region, const ProfileGrid& grid, double shift);

/// Symmetric uniform search grid along the profile normal. The default range
/// extends past the profile window plus the widest kernel support: the
/// confidence normalization must integrate over the region where the
/// likelihood of a cortex-free profile has already plateaued, otherwise the
/// posterior piles up at the grid boundary and cortex-free profiles stop
/// being down-weighted.
struct SearchGrid {
  double max_shift = 5.0;  // s_max, mm
  double step = 0.05;      // delta_s, mm

  int count() const { return 2 * static_cast<int>(std::lround(max_shift / step)) + 1; }
  double shift(int k) const {
    return (k - static_cast<int>(std::lround(max_shift / step))) * step;
  }
  void validate() const;
};

/// MAP displacement along the profile direction and its confidence.
struct Displacement {
  double shift = 0.0;       // s-hat, mm
  double confidence = 0.0;  // gamma = posterior density at s-hat, 1/mm
};

/// Exhaustive posterior maximization over the search grid. Score is
/// log-likelihood plus the log of the N(0, sigma_s^2) prior; ties resolve to
/// the smallest |s|, then to the negative candidate. The confidence is the
/// discrete normalization of the posterior at the maximizer. Invalid profiles
/// yield (0, 0).
Displacement optimal_displacement(const Profile& profile, const MeasurementModelTable& table,
                                  RegionLabel region, const ProfileGrid& grid, double sigma_s,
                                  const SearchGrid& search);

}  // namespace cortexfit
