#include "cortexfit/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cortexfit/key_value.hpp"

namespace cortexfit {

CalibratedVolume::CalibratedVolume(std::array<int, 3> dims, std::array<double, 3> spacing_mm,
                                   std::array<double, 3> origin_mm, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing_mm), origin_(origin_mm), voxels_(std::move(voxels)) {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] < 1) throw Error("volume: dims must be >= 1");
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
      throw Error("volume: spacing must be > 0");
    if (!std::isfinite(origin_[a])) throw Error("volume: origin must be finite");
  }
  const std::size_t expected = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (voxels_.size() != expected) {
    std::ostringstream msg;
    msg << "volume: voxel count " << voxels_.size() << " does not match dims "
        << dims_[0] << "x" << dims_[1] << "x" << dims_[2] << " = " << expected;
    throw Error(msg.str());
  }
  for (const float v : voxels_)
    if (!std::isfinite(v)) throw Error("volume: voxel values must be finite");
}

std::optional<double> CalibratedVolume::sample_trilinear(const Vec3& p) const {
  int cell[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double lo = origin_[a];
    const double hi = origin_[a] + (dims_[a] - 1) * spacing_[a];
    if (p[a] < lo || p[a] > hi) return std::nullopt;
    if (dims_[a] == 1) {
      cell[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    const double u = (p[a] - lo) / spacing_[a];
    int i = static_cast<int>(std::floor(u));
    if (i > dims_[a] - 2) i = dims_[a] - 2;
    if (i < 0) i = 0;
    cell[a] = i;
    frac[a] = u - i;
  }

  const int sx = dims_[0] == 1 ? 0 : 1;
  const int sy = dims_[1] == 1 ? 0 : 1;
  const int sz = dims_[2] == 1 ? 0 : 1;
  double value = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                         (dz ? frac[2] : 1.0 - frac[2]);
        if (w == 0.0) continue;
        value += w * at(cell[0] + dx * sx, cell[1] + dy * sy, cell[2] + dz * sz);
      }
  return value;
}

std::optional<double> sample_trilinear(const CalibratedVolume& vol, const Vec3& p) {
  return vol.sample_trilinear(p);
}

CalibratedVolume calibrate(const CalibratedVolume& raw, double slope, double intercept) {
  if (slope == 0.0) throw Error("calibrate: slope must be nonzero");
  std::vector<float> voxels(raw.voxel_count());
  const auto& src = raw.voxels();
  for (std::size_t i = 0; i < src.size(); ++i)
    voxels[i] = static_cast<float>(slope * static_cast<double>(src[i]) + intercept);
  return CalibratedVolume(raw.dims(), raw.spacing(), raw.origin(), std::move(voxels));
}

namespace {

void byteswap_payload(std::vector<float>& voxels) {
  for (float& v : voxels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = __builtin_bswap32(bits);
    std::memcpy(&v, &bits, 4);
  }
}

}  // namespace

CalibratedVolume read_volume(const std::filesystem::path& header_path) {
  const KeyValueFile header = read_key_value_file(header_path);
  for (const auto& [key, value] : header.entries) {
    if (key != "dims" && key != "spacing" && key != "origin" && key != "data")
      throw Error(header.source + ": unknown key '" + key + "'");
  }
  const auto dims_ll = parse_int_triple(header.get("dims"), header.source + ": dims");
  std::array<int, 3> dims;
  for (int a = 0; a < 3; ++a) {
    if (dims_ll[a] < 1) throw Error(header.source + ": dims must be positive");
    dims[a] = static_cast<int>(dims_ll[a]);
  }
  const auto spacing = parse_double_triple(header.get("spacing"), header.source + ": spacing");
  const auto origin = parse_double_triple(header.get("origin"), header.source + ": origin");

  const std::filesystem::path data_path =
      header_path.parent_path() / std::filesystem::path(header.get("data"));
  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw Error("cannot open payload '" + data_path.string() + "'");
  data.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(data.tellg());
  data.seekg(0, std::ios::beg);

  const std::uint64_t count =
      static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  if (file_size != count * 4) {
    std::ostringstream msg;
    msg << data_path.string() << ": payload holds " << file_size / 4
        << " float32 values but header declares " << count;
    throw Error(msg.str());
  }
  std::vector<float> voxels(count);
  data.read(reinterpret_cast<char*>(voxels.data()), static_cast<std::streamsize>(count * 4));
  if (!data) throw Error("failed reading payload '" + data_path.string() + "'");
  if constexpr (std::endian::native == std::endian::big) byteswap_payload(voxels);

  return CalibratedVolume(dims, spacing, origin, std::move(voxels));
}

void write_volume(const CalibratedVolume& vol, const std::filesystem::path& header_path) {
  const std::filesystem::path data_name = header_path.filename().string() + ".raw";
  const std::filesystem::path data_path = header_path.parent_path() / data_name;

  std::ofstream header(header_path);
  if (!header) throw Error("cannot write '" + header_path.string() + "'");
  header << "dims = " << vol.dims()[0] << " " << vol.dims()[1] << " " << vol.dims()[2] << "\n";
  header << "spacing = " << format_double(vol.spacing()[0]) << " "
         << format_double(vol.spacing()[1]) << " " << format_double(vol.spacing()[2]) << "\n";
  header << "origin = " << format_double(vol.origin()[0]) << " "
         << format_double(vol.origin()[1]) << " " << format_double(vol.origin()[2]) << "\n";
  header << "data = " << data_name.string() << "\n";
  if (!header.flush()) throw Error("failed writing '" + header_path.string() + "'");

  std::ofstream data(data_path, std::ios::binary);
  if (!data) throw Error("cannot write '" + data_path.string() + "'");
  if constexpr (std::endian::native == std::endian::big) {
    std::vector<float> swapped = vol.voxels();
    byteswap_payload(swapped);
    data.write(reinterpret_cast<const char*>(swapped.data()),
               static_cast<std::streamsize>(swapped.size() * 4));
  } else {
    data.write(reinterpret_cast<const char*>(vol.voxels().data()),
               static_cast<std::streamsize>(vol.voxels().size() * 4));
  }
  if (!data.flush()) throw Error("failed writing '" + data_path.string() + "'");
}

}  // namespace cortexfit
