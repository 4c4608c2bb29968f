#include <doctest.h>

#include <cmath>

#include "cortexfit/phantom.hpp"
#include "support/oracles.hpp"

using namespace cortexfit;

TEST_CASE("phantom presets and analytic density") {
  const PhantomSpec low = PhantomSpec::preset("low");
  CHECK(low.wall == 0.5);
  CHECK(low.endplate == 1.0);
  CHECK(low.center_radius() == doctest::Approx(17.75));
  CHECK(PhantomSpec::preset("medium").center_radius() == doctest::Approx(17.5));
  CHECK(PhantomSpec::preset("high").center_radius() == doctest::Approx(17.25));
  CHECK(PhantomSpec::preset("low").plane_offset() == doctest::Approx(12.0));
  CHECK(PhantomSpec::preset("high").plane_offset() == doctest::Approx(11.5));
  CHECK_THROWS_AS(PhantomSpec::preset("extra"), Error);

  SUBCASE("shell membership at the paper's optimal radius") {
    // 36 mm diameter, 0.5 mm wall: the shell spans [17.5, 18.0] mm.
    CHECK(phantom_density(low, {17.75, 0.0, 0.0}) == low.cortical);
    CHECK(phantom_density(low, {17.4, 0.0, 0.0}) == low.trabecular);
    CHECK(phantom_density(low, {18.1, 0.0, 0.0}) == low.background);
  }
  SUBCASE("interior and exterior points") {
    CHECK(phantom_density(low, {0.0, 0.0, 0.0}) == low.trabecular);
    CHECK(phantom_density(low, {0.0, 0.0, 12.1}) == low.cortical);  // endplate slab
    CHECK(phantom_density(low, {0.0, 0.0, 12.6}) == low.background);
    CHECK(phantom_density(low, {30.0, 0.0, 0.0}) == low.background);
  }
}

TEST_CASE("rasterize: validation and box averaging") {
  PhantomSpec spec;
  spec.diameter = 16.0;
  spec.height = 8.0;
  spec.wall = 0.5;
  spec.endplate = 1.0;

  SUBCASE("spacing coarser than wall/4 is rejected") {
    CHECK_THROWS_WITH_AS(rasterize(spec, 0.2, 1.0), doctest::Contains("too coarse"), Error);
  }
  SUBCASE("a voxel centered on the outer surface averages to the midpoint value") {
    PhantomSpec half = spec;
    half.supersampling = 4;
    const double value =
        rasterized_voxel_value(half, {half.outer_radius(), 0.0, 0.0}, {0.1, 0.1, 0.1});
    CHECK(value == doctest::Approx(0.5 * (half.cortical + half.background)));
  }
  SUBCASE("deep interior and exterior voxels are exact") {
    const CalibratedVolume fine = rasterize(spec, 0.125, 1.0, 2);
    const auto center = fine.sample_trilinear({0.0, 0.0, 0.0});
    REQUIRE(center.has_value());
    CHECK(*center == doctest::Approx(spec.trabecular));
    const auto outside = fine.sample_trilinear({8.8, 0.0, 0.0});
    REQUIRE(outside.has_value());
    CHECK(*outside == doctest::Approx(spec.background));
  }
}

TEST_CASE("simulate_scan: constants, determinism, mass conservation") {
  SUBCASE("unit-integral kernels preserve a constant volume") {
    std::vector<float> voxels(61 * 61 * 61, 321.5f);
    const CalibratedVolume fine({61, 61, 61}, {0.2, 0.2, 0.2}, {-6, -6, -6}, voxels);
    const ScannerConfig scanner{1.0, 0.4};
    const CalibratedVolume scan = simulate_scan(fine, scanner, {0.4, 0.4, 1.0}, 0.0, 1);
    for (const float v : scan.voxels()) CHECK(v == doctest::Approx(321.5).epsilon(1e-6));
  }
  SUBCASE("same seed reproduces the scan bit for bit, different seed does not") {
    std::vector<float> voxels(41 * 41 * 41, 100.0f);
    const CalibratedVolume fine({41, 41, 41}, {0.25, 0.25, 0.25}, {-5, -5, -5}, voxels);
    const ScannerConfig scanner{1.0, 0.3};
    const CalibratedVolume a = simulate_scan(fine, scanner, {0.5, 0.5, 1.0}, 10.0, 42);
    const CalibratedVolume b = simulate_scan(fine, scanner, {0.5, 0.5, 1.0}, 10.0, 42);
    const CalibratedVolume c = simulate_scan(fine, scanner, {0.5, 0.5, 1.0}, 10.0, 43);
    CHECK(a.voxels() == b.voxels());
    CHECK(a.voxels() != c.voxels());
  }
  SUBCASE("interior mass is conserved within half a percent") {
    PhantomSpec spec;
    spec.diameter = 16.0;
    spec.height = 10.0;
    spec.wall = 0.5;
    spec.endplate = 1.0;
    // Margin of 4 keeps the coarse grid's usable range wider than the box.
    const CalibratedVolume fine = rasterize(spec, 0.125, 4.0, 2);
    const ScannerConfig scanner{1.0, 0.5};
    const CalibratedVolume coarse = simulate_scan(fine, scanner, {0.5, 0.5, 1.0}, 0.0, 1, 2);

    // Box whose faces sit in locally constant material (background laterally,
    // trabecular interior along z), far enough from the volume edges. Voxels
    // are weighted by the overlap of their cell with the box so both grids
    // integrate over the identical region.
    const auto box_mean = [](const CalibratedVolume& vol) {
      const double box[3] = {9.5, 9.5, 3.0};
      double acc = 0.0, weight_sum = 0.0;
      for (int z = 0; z < vol.dims()[2]; ++z)
        for (int y = 0; y < vol.dims()[1]; ++y)
          for (int x = 0; x < vol.dims()[0]; ++x) {
            const Vec3 p = vol.voxel_center(x, y, z);
            double w = 1.0;
            for (int a = 0; a < 3; ++a) {
              const double half = 0.5 * vol.spacing()[a];
              const double overlap =
                  std::min(p[a] + half, box[a]) - std::max(p[a] - half, -box[a]);
              w *= std::max(0.0, overlap) / vol.spacing()[a];
            }
            if (w == 0.0) continue;
            acc += w * vol.at(x, y, z);
            weight_sum += w;
          }
      return acc / weight_sum;
    };
    const double fine_mean = box_mean(fine);
    const double coarse_mean = box_mean(coarse);
    CHECK(std::abs(coarse_mean - fine_mean) <= 0.005 * std::abs(fine_mean));
  }
}

TEST_CASE("simulated wall profile: the blurred ridge shifts toward the denser interior") {
  // Fixed in-plane blur, trabecular 100 vs 200 mg/cc: the apparent ridge
  // (argmax of the blurred radial profile) moves away from the true cortex
  // center toward the trabecular side as the interior density rises. The
  // closed form for a flat wall puts the ridge at
  // sigma_eff^2/(2w) * log((y1-y0)/(y1-y2)) inside the center.
  PhantomSpec spec;
  spec.diameter = 16.0;
  spec.height = 8.0;
  spec.wall = 0.5;
  spec.endplate = 1.0;

  const ScannerConfig scanner{0.1, 0.5};
  const auto ridge_radius = [&](double trabecular) {
    PhantomSpec s = spec;
    s.trabecular = trabecular;
    const CalibratedVolume fine = rasterize(s, 0.1, 3.0, 2);
    // Near-isotropic output keeps the out-of-plane factor negligible so the
    // in-plane sigma dominates, as in the flat-wall analysis.
    const CalibratedVolume scan = simulate_scan(fine, scanner, {0.1, 0.1, 0.1}, 0.0, 1, 2);

    double best_x = 0.0, best = -1e300;
    for (double x = 6.8; x <= 8.5 + 1e-9; x += 0.1) {
      const auto v = scan.sample_trilinear({x, 0.0, 0.0});
      REQUIRE(v.has_value());
      if (*v > best) {
        best = *v;
        best_x = x;
      }
    }
    // Three-point parabola vertex around the discrete maximum.
    const double f0 = *scan.sample_trilinear({best_x - 0.1, 0.0, 0.0});
    const double f1 = best;
    const double f2 = *scan.sample_trilinear({best_x + 0.1, 0.0, 0.0});
    return best_x + 0.05 * (f0 - f2) / (f0 - 2.0 * f1 + f2);
  };

  const double center = spec.center_radius();  // 7.75
  const double ridge_low = ridge_radius(100.0);
  const double ridge_high = ridge_radius(200.0);

  CHECK(ridge_low > center - spec.wall);
  CHECK(ridge_low < center + spec.wall);
  CHECK(ridge_high < ridge_low);  // toward the interior
  CHECK(std::abs(ridge_high - center) > std::abs(ridge_low - center));
  CHECK(ridge_low - ridge_high > 0.02);
  CHECK(ridge_low - ridge_high < 0.15);
}

TEST_CASE("ground truth file round trip") {
  testing::TempDir dir("phantom_truth");
  const PhantomSpec spec = PhantomSpec::preset("high");
  write_ground_truth(spec, dir / "truth.txt");
  const PhantomTruth truth = read_ground_truth(dir / "truth.txt");
  CHECK(truth.center_radius == doctest::Approx(17.25));
  CHECK(truth.plane_offset == doctest::Approx(11.5));
  CHECK(truth.wall == doctest::Approx(1.5));
  CHECK(truth.cortical == doctest::Approx(1000.0));
}
