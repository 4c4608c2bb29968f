#include <doctest.h>

#include <cmath>

#include "cortexfit/displacement.hpp"
#include "cortexfit/measurement_model.hpp"
#include "cortexfit/mesh.hpp"
#include "support/oracles.hpp"

using namespace cortexfit;

namespace {

const ScannerConfig kScanner{1.0, 0.4};

BoneModelParams sharp_params() {
  BoneModelParams p;
  p.soft_tissue = {0.0, 20.0};
  p.cortical = {1000.0, 100.0};
  p.trabecular = {100.0, 30.0};
  p.half_width = {std::log(0.3), 0.1};
  return p;
}

// Shared lookup table: theta nodes every 15 degrees, built once.
const MeasurementModelTable& test_table() {
  static const MeasurementModelTable table = [] {
    RegionParams params;
    params[RegionLabel::VerticalCortex] = sharp_params();
    TableAxes axes;
    axes.t = {-2.0, 2.0, 41};
    axes.theta = {0.0, 90.0, 7};
    axes.z = {-500.0, 1600.0, 1051};
    return MeasurementModelTable::build(kScanner, params, axes, 64, 2);
  }();
  return table;
}

// Noise-free profile generated from the conditional mean curve, centered at
// shift s0 along the profile.
Profile synthetic_profile(const ProfileGrid& grid, double theta_deg, double s0) {
  const CombinedPsfCdf cdf = combined_psf_cdf(kScanner, theta_deg);
  const BoneModelParams params = sharp_params();
  const double w_bar = std::exp(params.half_width.log_mean);
  Profile profile;
  profile.theta_deg = theta_deg;
  profile.direction = Vec3::UnitX();
  profile.valid = true;
  profile.values.resize(grid.count());
  for (int j = 0; j < grid.count(); ++j)
    profile.values[j] =
        conditional_moments(params, cdf, grid.offset(j) - s0, w_bar).first;
  return profile;
}

}  // namespace

TEST_CASE("sample_profiles: constant volume, bounds, angles, excluded labels") {
  const LabeledSurfaceMesh tmpl = make_template(8.0, 10.0, 16);
  const ProfileGrid grid{2.0, 10};

  SUBCASE("profiles inside a constant volume read the constant") {
    std::vector<float> voxels(41 * 41 * 41, 100.0f);
    const CalibratedVolume volume({41, 41, 41}, {1, 1, 1}, {-20, -20, -20}, voxels);
    const auto profiles = sample_profiles(tmpl, volume, grid);
    REQUIRE(profiles.size() == static_cast<std::size_t>(tmpl.vertex_count()));
    for (int i = 0; i < tmpl.vertex_count(); ++i) {
      if (tmpl.labels[i] == RegionLabel::CutPedicles) {
        CHECK_FALSE(profiles[i].valid);  // excluded from fitting
        continue;
      }
      REQUIRE(profiles[i].valid);
      for (const double v : profiles[i].values) CHECK(v == doctest::Approx(100.0));
    }
  }
  SUBCASE("a profile leaving the volume invalidates the whole profile") {
    // The volume ends at x = 9: outward samples of the +x wall vertices exit.
    std::vector<float> voxels(30 * 41 * 41, 100.0f);
    const CalibratedVolume volume({30, 41, 41}, {1, 1, 1}, {-20, -20, -20}, voxels);
    const auto profiles = sample_profiles(tmpl, volume, grid);
    bool saw_invalid = false, saw_valid = false;
    for (int i = 0; i < tmpl.vertex_count(); ++i) {
      if (tmpl.labels[i] != RegionLabel::VerticalCortex) continue;
      (profiles[i].valid ? saw_valid : saw_invalid) = true;
      if (tmpl.vertices[i].x() > 7.5) CHECK_FALSE(profiles[i].valid);
    }
    CHECK(saw_invalid);
    CHECK(saw_valid);
  }
  SUBCASE("theta folds the angle to the scanner axis into [0, 90]") {
    std::vector<float> voxels(41 * 41 * 41, 0.0f);
    const CalibratedVolume volume({41, 41, 41}, {1, 1, 1}, {-20, -20, -20}, voxels);
    const auto profiles = sample_profiles(tmpl, volume, grid);
    for (int i = 0; i < tmpl.vertex_count(); ++i) {
      CHECK(profiles[i].theta_deg >= 0.0);
      CHECK(profiles[i].theta_deg <= 90.0);
      const Vec3& v = tmpl.vertices[i];
      if (v.x() == 0.0 && v.y() == 0.0)  // cap centers, normal along z
        CHECK(profiles[i].theta_deg == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    }
    // Wall vertices on an interior ring point radially: perpendicular to z.
    int wall_checked = 0;
    for (int i = 0; i < tmpl.vertex_count(); ++i)
      if (tmpl.labels[i] == RegionLabel::VerticalCortex) {
        CHECK(profiles[i].theta_deg == doctest::Approx(90.0).epsilon(1e-6));
        ++wall_checked;
      }
    CHECK(wall_checked > 0);
  }
}

TEST_CASE("profile log likelihood: synthetic maxima and clamped extremes") {
  const ProfileGrid grid{2.0, 20};
  const auto& table = test_table();

  SUBCASE("a profile generated at shift 0 scores best at shift 0") {
    const Profile profile = synthetic_profile(grid, 45.0, 0.0);
    const double at_zero =
        profile_log_likelihood(profile, table, RegionLabel::VerticalCortex, grid, 0.0);
    for (double s = -2.0; s <= 2.0 + 1e-12; s += 0.05) {
      if (s == 0.0) continue;
      CHECK(profile_log_likelihood(profile, table, RegionLabel::VerticalCortex, grid, s) <=
            at_zero);
    }
  }
  SUBCASE("a profile generated at +0.3 mm scores best near +0.3 mm") {
    const Profile profile = synthetic_profile(grid, 45.0, 0.3);
    double best_s = -2.0, best = -1e300;
    for (double s = -2.0; s <= 2.0 + 1e-12; s += 0.05) {
      const double score =
          profile_log_likelihood(profile, table, RegionLabel::VerticalCortex, grid, s);
      if (score > best) {
        best = score;
        best_s = s;
      }
    }
    CHECK(best_s == doctest::Approx(0.3).scale(1.0).epsilon(1e-9));
  }
  SUBCASE("all-clamped extreme densities stay finite") {
    Profile extreme;
    extreme.valid = true;
    extreme.theta_deg = 45.0;
    extreme.direction = Vec3::UnitX();
    extreme.values.assign(grid.count(), 1e6);
    const double score =
        profile_log_likelihood(extreme, table, RegionLabel::VerticalCortex, grid, 0.0);
    CHECK(std::isfinite(score));
  }
}

TEST_CASE("optimal displacement: recovery, ties, confidence") {
  const ProfileGrid grid{2.0, 20};
  const SearchGrid search{};  // default range covers the flat-profile plateau
  const auto& table = test_table();

  SUBCASE("shift recovery over the acceptance grid of s0 and theta") {
    for (const double theta : {0.0, 45.0, 90.0})
      for (const double s0 : {-1.5, -0.5, 0.0, 0.7, 1.5}) {
        const Profile profile = synthetic_profile(grid, theta, s0);
        const Displacement d =
            optimal_displacement(profile, table, RegionLabel::VerticalCortex, grid, 2.0, search);
        CHECK(std::abs(d.shift - s0) <= 0.05 + 1e-12);
      }
  }
  SUBCASE("symmetric posterior resolves to zero shift") {
    const Profile profile = synthetic_profile(grid, 90.0, 0.0);
    const Displacement d =
        optimal_displacement(profile, table, RegionLabel::VerticalCortex, grid, 2.0, search);
    CHECK(d.shift == 0.0);
  }
  SUBCASE("invalid profile yields (0, 0)") {
    Profile invalid;
    const Displacement d =
        optimal_displacement(invalid, table, RegionLabel::VerticalCortex, grid, 2.0, search);
    CHECK(d.shift == 0.0);
    CHECK(d.confidence == 0.0);
  }
  SUBCASE("a clean cortex outweighs a flat soft-tissue profile tenfold") {
    const Profile cortex = synthetic_profile(grid, 90.0, 0.0);
    Profile flat = cortex;
    flat.values.assign(grid.count(), sharp_params().soft_tissue.mean);
    const Displacement d_cortex =
        optimal_displacement(cortex, table, RegionLabel::VerticalCortex, grid, 2.0, search);
    const Displacement d_flat =
        optimal_displacement(flat, table, RegionLabel::VerticalCortex, grid, 2.0, search);
    CHECK(d_cortex.confidence >= 10.0 * d_flat.confidence);
    CHECK(d_flat.confidence > 0.0);
  }
}

TEST_CASE("optimal displacement: equivariance and normalization invariance") {
  const ProfileGrid grid{2.0, 20};
  const SearchGrid search{2.0, 0.05};
  const auto& table = test_table();

  SUBCASE("confidence is invariant under a constant likelihood offset") {
    // gamma is a normalized posterior, so adding a constant to every score
    // must cancel. A constant density rescale of the profile likelihood is
    // exactly that; emulate it by comparing gamma computed from shifted
    // scores directly.
    const Profile profile = synthetic_profile(grid, 45.0, 0.4);
    const Displacement base =
        optimal_displacement(profile, table, RegionLabel::VerticalCortex, grid, 2.0, search);

    const int n = search.count();
    std::vector<double> scores(n);
    for (int k = 0; k < n; ++k)
      scores[k] =
          profile_log_likelihood(profile, table, RegionLabel::VerticalCortex, grid,
                                 search.shift(k)) +
          std::log(normal_pdf(search.shift(k), 0.0, 2.0));
    for (const double offset : {-100.0, 0.0, 250.0}) {
      double best = -1e300;
      for (const double s : scores) best = std::max(best, s + offset);
      double evidence = 0.0;
      for (const double s : scores) evidence += std::exp(s + offset - best);
      const double gamma = 1.0 / (evidence * search.step);
      CHECK(gamma == doctest::Approx(base.confidence).epsilon(1e-9));
    }
  }

  SUBCASE("translating the volume along the profile direction shifts s-hat") {
    // Layered volume: density depends on x only, cortex center plane at
    // x = 10 - s0. The template wall vertex at (radius, 0, z) has inward
    // direction -x, so the profile reads the layering directly.
    const BoneModelParams params = sharp_params();
    const CombinedPsfCdf cdf = combined_psf_cdf(kScanner, 90.0);
    const double w_bar = std::exp(params.half_width.log_mean);

    const auto layered_volume = [&](double delta) {
      // Cortex center plane at x = 10 - delta; moving delta along the inward
      // profile direction (-x) must move s-hat by +delta.
      const std::array<int, 3> dims = {121, 41, 41};
      std::vector<float> voxels(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
      std::size_t idx = 0;
      for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
          for (int x = 0; x < dims[0]; ++x) {
            const double wx = -15.0 + 0.25 * x;
            voxels[idx++] = static_cast<float>(
                conditional_moments(params, cdf, (10.0 - delta) - wx, w_bar).first);
          }
      return CalibratedVolume(dims, {0.25, 0.5, 0.5}, {-15.0, -10.0, -10.0}, voxels);
    };

    const LabeledSurfaceMesh tmpl = make_template(10.0, 8.0, 24);
    int probe = -1;
    for (int i = 0; i < tmpl.vertex_count(); ++i)
      if (tmpl.labels[i] == RegionLabel::VerticalCortex &&
          std::abs(tmpl.vertices[i].y()) < 1e-12 && tmpl.vertices[i].x() > 0 &&
          std::abs(tmpl.vertices[i].z()) < 1.5) {
        probe = i;
        break;
      }
    REQUIRE(probe >= 0);

    const ProfileGrid pgrid{2.0, 20};
    double shifts[2];
    int k = 0;
    for (const double delta : {0.0, 0.4}) {
      const CalibratedVolume volume = layered_volume(delta);
      const auto profiles = sample_profiles(tmpl, volume, pgrid);
      REQUIRE(profiles[probe].valid);
      const Displacement d = optimal_displacement(profiles[probe], table,
                                                  RegionLabel::VerticalCortex, pgrid, 2.0, search);
      shifts[k++] = d.shift;
    }
    CHECK(std::abs((shifts[1] - shifts[0]) - 0.4) <= 0.05 + 1e-12);
  }
}
