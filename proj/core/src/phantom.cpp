#include "cortexfit/phantom.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "cortexfit/key_value.hpp"
#include "cortexfit/parallel.hpp"
#include "cortexfit/rng.hpp"

namespace cortexfit {

PhantomSpec PhantomSpec::preset(const std::string& name) {
  PhantomSpec spec;
  if (name == "low") {
    spec.wall = 0.5;
    spec.endplate = 1.0;
  } else if (name == "medium") {
    spec.wall = 1.0;
    spec.endplate = 1.0;
  } else if (name == "high") {
    spec.wall = 1.5;
    spec.endplate = 2.0;
  } else {
    throw Error("unknown phantom preset '" + name + "' (expected low, medium or high)");
  }
  return spec;
}

void PhantomSpec::validate() const {
  if (!(diameter > 0.0) || !(height > 0.0))
    throw Error("phantom: diameter and height must be > 0");
  if (!(wall > 0.0) || !(endplate > 0.0)) throw Error("phantom: thicknesses must be > 0");
  if (!(wall < outer_radius())) throw Error("phantom: wall must be thinner than the radius");
  if (!(2.0 * endplate < height))
    throw Error("phantom: endplates must leave an interior");
  if (supersampling < 2) throw Error("phantom: supersampling must be >= 2");
  if (!(noise_sd >= 0.0)) throw Error("phantom: noise_sd must be >= 0");
  for (const double d : {cortical, trabecular, background})
    if (!std::isfinite(d)) throw Error("phantom: densities must be finite");
}

double phantom_density(const PhantomSpec& spec, const Vec3& p) {
  const double r = std::hypot(p.x(), p.y());
  const double half_height = 0.5 * spec.height;
  if (r > spec.outer_radius() || std::abs(p.z()) > half_height) return spec.background;
  if (r >= spec.outer_radius() - spec.wall || std::abs(p.z()) >= half_height - spec.endplate)
    return spec.cortical;
  return spec.trabecular;
}

double rasterized_voxel_value(const PhantomSpec& spec, const Vec3& center,
                              const std::array<double, 3>& spacing) {
  const int s = spec.supersampling;
  double acc = 0.0;
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b)
      for (int c = 0; c < s; ++c) {
        const Vec3 p = center + Vec3(((a + 0.5) / s - 0.5) * spacing[0],
                                     ((b + 0.5) / s - 0.5) * spacing[1],
                                     ((c + 0.5) / s - 0.5) * spacing[2]);
        acc += phantom_density(spec, p);
      }
  return acc / (static_cast<double>(s) * s * s);
}

CalibratedVolume rasterize(const PhantomSpec& spec, double fine_spacing, double margin,
                           int threads) {
  spec.validate();
  if (!(fine_spacing > 0.0)) throw Error("rasterize: spacing must be > 0");
  if (fine_spacing > spec.wall / 4.0)
    throw Error("rasterize: spacing too coarse (must be <= wall/4)");
  if (!(margin >= 0.0)) throw Error("rasterize: margin must be >= 0");

  const std::array<double, 3> half = {spec.outer_radius() + margin, spec.outer_radius() + margin,
                                      0.5 * spec.height + margin};
  std::array<int, 3> dims;
  std::array<double, 3> origin;
  const std::array<double, 3> spacing = {fine_spacing, fine_spacing, fine_spacing};
  for (int a = 0; a < 3; ++a) {
    const int side = static_cast<int>(std::ceil(half[a] / fine_spacing));
    dims[a] = 2 * side + 1;
    origin[a] = -side * fine_spacing;
  }

  std::vector<float> voxels(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  parallel_for(dims[2], threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t iz = begin; iz < end; ++iz) {
      std::size_t idx = static_cast<std::size_t>(dims[0]) * dims[1] * iz;
      for (int iy = 0; iy < dims[1]; ++iy)
        for (int ix = 0; ix < dims[0]; ++ix, ++idx) {
          const Vec3 center(origin[0] + ix * fine_spacing, origin[1] + iy * fine_spacing,
                            origin[2] + iz * fine_spacing);
          voxels[idx] = static_cast<float>(rasterized_voxel_value(spec, center, spacing));
        }
    }
  });
  return CalibratedVolume(dims, spacing, origin, std::move(voxels));
}

namespace {

std::vector<double> normalized_taps(int radius, const std::function<double(int)>& f) {
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = f(k);
    sum += taps[k + radius];
  }
  for (double& t : taps) t /= sum;  // discrete unit integral, preserves constants
  return taps;
}

// Separable pass along one axis with edge replication.
void blur_axis(std::vector<float>& voxels, const std::array<int, 3>& dims, int axis,
               const std::vector<double>& taps, int threads) {
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);
  const int len = dims[axis];

  // Lines orthogonal to the axis.
  const std::size_t line_count = (nx * ny * nz) / len;
  std::vector<float> out(voxels.size());
  parallel_for(line_count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t line = begin; line < end; ++line) {
      // Decompose the line index into the two fixed coordinates.
      std::size_t base;
      if (axis == 0) {
        base = line * nx;
      } else if (axis == 1) {
        const std::size_t ix = line % nx, iz = line / nx;
        base = ix + nx * ny * iz;
      } else {
        base = line;
      }
      for (int i = 0; i < len; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int j = i + k;
          if (j < 0) j = 0;
          if (j >= len) j = len - 1;
          acc += taps[k + radius] * voxels[base + stride * j];
        }
        out[base + stride * i] = static_cast<float>(acc);
      }
    }
  });
  voxels.swap(out);
}

}  // namespace

CalibratedVolume simulate_scan(const CalibratedVolume& fine, const ScannerConfig& scanner,
                               const std::array<double, 3>& out_spacing, double noise_sd,
                               std::uint64_t seed, int threads) {
  scanner.validate();
  if (!(noise_sd >= 0.0)) throw Error("simulate_scan: noise_sd must be >= 0");
  for (int a = 0; a < 3; ++a) {
    if (!(out_spacing[a] > 0.0)) throw Error("simulate_scan: out spacing must be > 0");
    if (out_spacing[a] < fine.spacing()[a])
      throw Error("simulate_scan: out spacing must be >= fine spacing");
  }

  const double sigma = scanner.in_plane_sigma;
  const double h = out_spacing[2];  // slice width tied to the slice spacing

  const int rx = static_cast<int>(std::ceil(4.0 * sigma / fine.spacing()[0]));
  const int ry = static_cast<int>(std::ceil(4.0 * sigma / fine.spacing()[1]));
  const int rz = static_cast<int>(std::ceil(h / fine.spacing()[2]));

  std::vector<float> blurred = fine.voxels();
  blur_axis(blurred, fine.dims(), 0,
            normalized_taps(rx, [&](int k) { return normal_pdf(k * fine.spacing()[0], 0.0, sigma); }),
            threads);
  blur_axis(blurred, fine.dims(), 1,
            normalized_taps(ry, [&](int k) { return normal_pdf(k * fine.spacing()[1], 0.0, sigma); }),
            threads);
  blur_axis(blurred, fine.dims(), 2,
            normalized_taps(rz, [&](int k) { return out_of_plane_psf(k * fine.spacing()[2], h); }),
            threads);
  const CalibratedVolume smooth(fine.dims(), fine.spacing(), fine.origin(), std::move(blurred));

  // Coarse grid: centered inside the fine volume shrunk by the kernel
  // supports, so every coarse sample interpolates fully blurred data.
  std::array<int, 3> dims;
  std::array<double, 3> origin;
  const std::array<double, 3> support = {4.0 * sigma, 4.0 * sigma, h};
  for (int a = 0; a < 3; ++a) {
    const double lo = fine.origin()[a] + support[a];
    const double hi = fine.origin()[a] + (fine.dims()[a] - 1) * fine.spacing()[a] - support[a];
    if (!(hi > lo)) throw Error("simulate_scan: fine volume too small for the kernel support");
    const int count = static_cast<int>(std::floor((hi - lo) / out_spacing[a])) + 1;
    dims[a] = count;
    origin[a] = 0.5 * (lo + hi) - 0.5 * (count - 1) * out_spacing[a];
  }

  std::vector<float> voxels(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  parallel_for(dims[2], threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t iz = begin; iz < end; ++iz) {
      std::size_t idx = static_cast<std::size_t>(dims[0]) * dims[1] * iz;
      for (int iy = 0; iy < dims[1]; ++iy)
        for (int ix = 0; ix < dims[0]; ++ix, ++idx) {
          const Vec3 p(origin[0] + ix * out_spacing[0], origin[1] + iy * out_spacing[1],
                       origin[2] + iz * out_spacing[2]);
          const auto value = smooth.sample_trilinear(p);
          if (!value) throw Error("simulate_scan: internal sampling out of bounds");
          voxels[idx] = static_cast<float>(*value);
        }
    }
  });

  if (noise_sd > 0.0) {
    NormalSampler noise(seed);
    for (float& v : voxels) v = static_cast<float>(v + noise_sd * noise.next());
  }
  return CalibratedVolume(dims, out_spacing, origin, std::move(voxels));
}

void write_ground_truth(const PhantomSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "center_radius = " << format_double(spec.center_radius()) << "\n";
  out << "plane_offset = " << format_double(spec.plane_offset()) << "\n";
  out << "outer_radius = " << format_double(spec.outer_radius()) << "\n";
  out << "height = " << format_double(spec.height) << "\n";
  out << "wall = " << format_double(spec.wall) << "\n";
  out << "endplate = " << format_double(spec.endplate) << "\n";
  out << "cortical = " << format_double(spec.cortical) << "\n";
  out << "trabecular = " << format_double(spec.trabecular) << "\n";
  out << "background = " << format_double(spec.background) << "\n";
  if (!out.flush()) throw Error("failed writing '" + path.string() + "'");
}

PhantomTruth read_ground_truth(const std::filesystem::path& path) {
  const KeyValueFile file = read_key_value_file(path);
  PhantomTruth truth;
  for (const auto& [key, value] : file.entries) {
    const std::string context = file.source + ": " + key;
    if (key == "center_radius") truth.center_radius = parse_double(value, context);
    else if (key == "plane_offset") truth.plane_offset = parse_double(value, context);
    else if (key == "outer_radius") truth.outer_radius = parse_double(value, context);
    else if (key == "height") truth.height = parse_double(value, context);
    else if (key == "wall") truth.wall = parse_double(value, context);
    else if (key == "endplate") truth.endplate = parse_double(value, context);
    else if (key == "cortical") truth.cortical = parse_double(value, context);
    else if (key == "trabecular") truth.trabecular = parse_double(value, context);
    else if (key == "background") truth.background = parse_double(value, context);
    else throw Error(file.source + ": unknown key '" + key + "'");
  }
  return truth;
}

}  // namespace cortexfit
