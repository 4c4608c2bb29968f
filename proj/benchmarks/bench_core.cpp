#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "cortexfit/arap.hpp"
#include "cortexfit/displacement.hpp"
#include "cortexfit/measurement_model.hpp"
#include "cortexfit/mesh.hpp"
#include "cortexfit/rng.hpp"
#include "cortexfit/volume.hpp"

namespace {

using namespace cortexfit;

const ScannerConfig kScanner{1.0, 0.4};

CalibratedVolume bench_volume() {
  const std::array<int, 3> dims = {96, 96, 48};
  std::vector<float> voxels(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  std::mt19937_64 rng(1);
  for (float& v : voxels) v = static_cast<float>(1000.0 * uniform_unit(rng));
  return CalibratedVolume(dims, {0.4, 0.4, 1.0}, {-19.0, -19.0, -23.5}, voxels);
}

const MeasurementModelTable& bench_table() {
  static const MeasurementModelTable table = [] {
    RegionParams params;
    params[RegionLabel::VerticalCortex] = default_bone_model();
    TableAxes axes;
    axes.theta = {0.0, 90.0, 16};
    axes.z = {-1000.0, 2000.0, 1501};
    return MeasurementModelTable::build(kScanner, params, axes, 64, 0);
  }();
  return table;
}

void BM_TrilinearSample(benchmark::State& state) {
  const CalibratedVolume volume = bench_volume();
  std::mt19937_64 rng(2);
  std::vector<Vec3> points(1024);
  for (Vec3& p : points)
    p = {-18.0 + 36.0 * uniform_unit(rng), -18.0 + 36.0 * uniform_unit(rng),
         -22.0 + 44.0 * uniform_unit(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(volume.sample_trilinear(points[i]));
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_TrilinearSample);

void BM_TableLookup(benchmark::State& state) {
  const auto view = bench_table().view(RegionLabel::VerticalCortex);
  std::mt19937_64 rng(3);
  std::vector<std::array<double, 3>> queries(1024);
  for (auto& q : queries)
    q = {-2.0 + 4.0 * uniform_unit(rng), 90.0 * uniform_unit(rng),
         -200.0 + 1400.0 * uniform_unit(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = queries[i];
    benchmark::DoNotOptimize(view(q[0], q[1], q[2]));
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_TableLookup);

void BM_CombinedPsfCdf(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(combined_psf_cdf(kScanner, 45.0));
}
BENCHMARK(BM_CombinedPsfCdf)->Unit(benchmark::kMillisecond);

void BM_OptimalDisplacement(benchmark::State& state) {
  const auto& table = bench_table();
  const BoneModelParams params = default_bone_model();
  const CombinedPsfCdf cdf = combined_psf_cdf(kScanner, 90.0);
  const ProfileGrid grid;
  const SearchGrid search;

  Profile profile;
  profile.valid = true;
  profile.theta_deg = 90.0;
  profile.direction = Vec3::UnitX();
  profile.values.resize(grid.count());
  for (int j = 0; j < grid.count(); ++j)
    profile.values[j] =
        conditional_moments(params, cdf, grid.offset(j), std::exp(params.half_width.log_mean))
            .first;

  for (auto _ : state)
    benchmark::DoNotOptimize(optimal_displacement(profile, table, RegionLabel::VerticalCortex,
                                                  grid, 2.0, search));
}
BENCHMARK(BM_OptimalDisplacement)->Unit(benchmark::kMicrosecond);

void BM_FitSurfaceTemplate(benchmark::State& state) {
  const LabeledSurfaceMesh tmpl = make_template(17.75, 24.0, 48);
  std::mt19937_64 rng(4);
  FitTargets targets;
  targets.points.resize(tmpl.vertices.size());
  targets.normals.resize(tmpl.vertices.size());
  targets.weights.assign(tmpl.vertices.size(), 1.0);
  const std::vector<Vec3> normals = vertex_normals(tmpl);
  for (std::size_t i = 0; i < tmpl.vertices.size(); ++i) {
    targets.normals[i] = -normals[i];
    targets.points[i] =
        tmpl.vertices[i] + (0.4 * uniform_unit(rng) - 0.2) * targets.normals[i];
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_surface(tmpl, targets));
}
BENCHMARK(BM_FitSurfaceTemplate)->Unit(benchmark::kMillisecond);

}  // namespace
