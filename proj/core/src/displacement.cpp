#include "cortexfit/displacement.hpp"

#include <cmath>

#include "cortexfit/numerics.hpp"
#include "cortexfit/parallel.hpp"

namespace cortexfit {

namespace {

constexpr double kDensityFloor = 1e-12;  // keeps the log finite on empty cells

}  // namespace

void ProfileGrid::validate() const {
  if (!(half_extent > 0.0)) throw Error("profile grid: half extent must be > 0");
  if (samples_per_side < 1) throw Error("profile grid: need at least one sample per side");
}

void SearchGrid::validate() const {
  if (!(max_shift > 0.0) || !(step > 0.0))
    throw Error("search grid: max shift and step must be > 0");
  if (std::lround(max_shift / step) < 1)
    throw Error("search grid: step larger than max shift");
}

std::vector<Profile> sample_profiles(const LabeledSurfaceMesh& mesh,
                                     const CalibratedVolume& volume, const ProfileGrid& grid,
                                     int threads) {
  grid.validate();
  const std::vector<Vec3> normals = vertex_normals(mesh);
  std::vector<Profile> profiles(mesh.vertices.size());

  parallel_for(mesh.vertices.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Profile& profile = profiles[i];
      profile.direction = -normals[i];  // inward: soft tissue at negative t
      profile.theta_deg =
          std::acos(std::min(1.0, std::abs(profile.direction.z()))) * 180.0 / std::numbers::pi;
      if (mesh.labels[i] == RegionLabel::CutPedicles) continue;

      profile.values.resize(grid.count());
      profile.valid = true;
      for (int j = 0; j < grid.count(); ++j) {
        const Vec3 p = mesh.vertices[i] + grid.offset(j) * profile.direction;
        const auto value = volume.sample_trilinear(p);
        if (!value) {
          profile.valid = false;
          profile.values.clear();
          break;
        }
        profile.values[j] = *value;
      }
    }
  });
  return profiles;
}

double profile_log_likelihood(const Profile& profile, const MeasurementModelTable& table,
                              RegionLabel region, const ProfileGrid& grid, double shift) {
  if (!profile.valid) throw Error("profile_log_likelihood: profile is invalid");
  const MeasurementModelTable::View view = table.view(region);
  double score = 0.0;
  for (int j = 0; j < grid.count(); ++j) {
    const double density = view(grid.offset(j) - shift, profile.theta_deg, profile.values[j]);
    score += std::log(std::max(density, kDensityFloor));
  }
  return score;
}

Displacement optimal_displacement(const Profile& profile, const MeasurementModelTable& table,
                                  RegionLabel region, const ProfileGrid& grid, double sigma_s,
                                  const SearchGrid& search) {
  if (!profile.valid) return {0.0, 0.0};
  search.validate();
  if (!(sigma_s > 0.0)) throw Error("optimal_displacement: sigma_s must be > 0");

  const int n = search.count();
  std::vector<double> scores(n);
  int best = 0;
  for (int k = 0; k < n; ++k) {
    const double s = search.shift(k);
    scores[k] = profile_log_likelihood(profile, table, region, grid, s) +
                std::log(normal_pdf(s, 0.0, sigma_s));
    if (k == 0) continue;
    const double s_best = search.shift(best);
    const bool better = scores[k] > scores[best] ||
                        (scores[k] == scores[best] &&
                         (std::abs(s) < std::abs(s_best) ||
                          (std::abs(s) == std::abs(s_best) && s < s_best)));
    if (better) best = k;
  }

  // Discrete evidence normalization, evaluated stably around the maximum.
  double evidence = 0.0;
  for (int k = 0; k < n; ++k) evidence += std::exp(scores[k] - scores[best]);
  const double gamma = 1.0 / (evidence * search.step);
  return {search.shift(best), gamma};
}

}  // namespace cortexfit
