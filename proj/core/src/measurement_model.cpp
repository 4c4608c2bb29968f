#include "cortexfit/measurement_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cortexfit/key_value.hpp"
#include "cortexfit/parallel.hpp"

namespace cortexfit {

void ScannerConfig::validate() const {
  if (!(slice_width > 0.0) || !std::isfinite(slice_width))
    throw Error("scanner: slice_width must be > 0");
  if (!(in_plane_sigma > 0.0) || !std::isfinite(in_plane_sigma))
    throw Error("scanner: in_plane_sigma must be > 0");
}

namespace {

// Cumulative integral of the unit-support triangle Lambda(2v) from -1/2.
double triangle_cumulative(double v) {
  if (v <= -0.5) return 0.0;
  if (v >= 0.5) return 0.5;
  if (v <= 0.0) return v + v * v + 0.25;
  return 0.25 + v - v * v;
}

}  // namespace

double out_of_plane_psf(double z, double h) {
  if (!(h > 0.0)) throw Error("out_of_plane_psf: slice width must be > 0");
  const double u = z / h;
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double lo = std::max(-0.5, u - 0.5);
  const double hi = std::min(0.5, u + 0.5);
  if (hi <= lo) return 0.0;
  // The raw rect*triangle integrates to 1/2; the 2/h factor restores a unit
  // integral after scaling the argument by h.
  return 2.0 / h * (triangle_cumulative(hi) - triangle_cumulative(lo));
}

double in_plane_psf(double r, double sigma) {
  if (!(sigma > 0.0)) throw Error("in_plane_psf: sigma must be > 0");
  return normal_pdf(r, 0.0, sigma);
}

namespace {

constexpr double kDegenerateLowDeg = 0.5;   // below: pure out-of-plane kernel
constexpr double kDegenerateHighDeg = 89.5; // above: pure in-plane kernel
constexpr int kSupportSamples = 4096;       // grid step = support width / this
constexpr double kGridMargin = 1.25;

}  // namespace

CombinedPsfCdf CombinedPsfCdf::build(const ScannerConfig& scanner, double theta_deg) {
  scanner.validate();
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0))
    throw Error("combined_psf_cdf: theta must lie in [0, 90] degrees");

  const double sigma = scanner.in_plane_sigma;
  const double h = scanner.slice_width;
  const double s = std::sin(deg_to_rad(theta_deg));
  const double c = std::cos(deg_to_rad(theta_deg));

  const double support_half = 4.0 * sigma * s + h * c;
  const double step = 2.0 * support_half / kSupportSamples;
  const int half_count = static_cast<int>(std::lround(kGridMargin * kSupportSamples / 2.0));
  const int n = 2 * half_count + 1;

  CombinedPsfCdf cdf;
  cdf.theta_deg_ = theta_deg;
  cdf.step_ = step;
  cdf.t_min_ = -half_count * step;

  std::vector<double> kernel(n);
  const auto node = [&](int i) { return cdf.t_min_ + i * step; };

  if (theta_deg < kDegenerateLowDeg) {
    // 1/sin scaling converges weakly to the identity of convolution.
    for (int i = 0; i < n; ++i) kernel[i] = out_of_plane_psf(node(i), h);
  } else if (theta_deg > kDegenerateHighDeg) {
    for (int i = 0; i < n; ++i) kernel[i] = in_plane_psf(node(i), sigma);
  } else {
    std::vector<double> in_plane(n), out_plane(n);
    for (int i = 0; i < n; ++i) {
      in_plane[i] = normal_pdf(node(i), 0.0, sigma * s);
      out_plane[i] = out_of_plane_psf(node(i), h * c);
    }
    // The scaled out-of-plane factor vanishes outside |t| <= h*c; restricting
    // the inner sum to that window keeps the full convolution cheap.
    int b_lo = 0, b_hi = n - 1;
    while (b_lo < n && out_plane[b_lo] == 0.0) ++b_lo;
    while (b_hi >= 0 && out_plane[b_hi] == 0.0) --b_hi;
    const int center = half_count;
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      const int j_lo = std::max(b_lo, k + center - (n - 1));
      const int j_hi = std::min(b_hi, k + center);
      for (int j = j_lo; j <= j_hi; ++j) acc += out_plane[j] * in_plane[k + center - j];
      kernel[k] = acc * step;
    }
  }

  double total = 0.0;
  for (int i = 0; i + 1 < n; ++i) total += 0.5 * (kernel[i] + kernel[i + 1]) * step;
  if (!(total > 0.0)) throw Error("combined_psf_cdf: degenerate kernel");
  const double inv_total = 1.0 / total;

  cdf.values_.resize(n);
  cdf.values_[0] = 0.0;
  double acc = 0.0;
  for (int i = 1; i < n; ++i) {
    acc += 0.5 * (kernel[i - 1] + kernel[i]) * step * inv_total;
    cdf.values_[i] = std::min(acc, 1.0);
  }
  cdf.values_[n - 1] = 1.0;
  return cdf;
}

double CombinedPsfCdf::operator()(double t) const {
  const double u = (t - t_min_) / step_;
  if (u <= 0.0) return 0.0;
  const int last = static_cast<int>(values_.size()) - 1;
  if (u >= last) return 1.0;
  const int i = static_cast<int>(u);
  const double f = u - i;
  return values_[i] + f * (values_[i + 1] - values_[i]);
}

CombinedPsfCdf combined_psf_cdf(const ScannerConfig& scanner, double theta_deg) {
  return CombinedPsfCdf::build(scanner, theta_deg);
}

std::pair<double, double> conditional_moments(const BoneModelParams& params,
                                              const CombinedPsfCdf& cdf, double t, double w) {
  if (!(w > 0.0)) throw Error("conditional_moments: half-width must be > 0");
  const double g_plus = cdf(t + w);
  const double g_minus = cdf(t - w);
  const double mean = params.soft_tissue.mean +
                      (params.cortical.mean - params.soft_tissue.mean) * g_plus +
                      (params.trabecular.mean - params.cortical.mean) * g_minus;
  const double w0 = 1.0 - g_plus;
  const double w1 = g_plus - g_minus;
  const double w2 = g_minus;
  const double var = params.soft_tissue.sd * params.soft_tissue.sd * w0 * w0 +
                     params.cortical.sd * params.cortical.sd * w1 * w1 +
                     params.trabecular.sd * params.trabecular.sd * w2 * w2;
  return {mean, var};
}

double conditional_density(double z, double t, double w, const BoneModelParams& params,
                           const CombinedPsfCdf& cdf) {
  const auto [mean, var] = conditional_moments(params, cdf, t, w);
  return normal_pdf(z, mean, std::sqrt(var));
}

MarginalDensity::MarginalDensity(const BoneModelParams& params, const CombinedPsfCdf& cdf,
                                 double t, int quad_order) {
  const double mu_w = params.half_width.log_mean;
  const double sd_w = params.half_width.log_sd;
  const QuadratureRule rule = gauss_legendre(quad_order, mu_w - 4.0 * sd_w, mu_w + 4.0 * sd_w);
  components_.resize(rule.nodes.size());
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double u = rule.nodes[k];
    const auto [mean, var] = conditional_moments(params, cdf, t, std::exp(u));
    components_[k] = {rule.weights[k] * normal_pdf(u, mu_w, sd_w), mean, std::sqrt(var)};
  }
}

double MarginalDensity::operator()(double z) const {
  double acc = 0.0;
  for (const Component& comp : components_) {
    const double u = (z - comp.mean) / comp.sd;
    acc += comp.weight * std::exp(-0.5 * u * u) / (comp.sd * std::sqrt(2.0 * std::numbers::pi));
  }
  return acc;
}

double marginal_density(double z, double t, const BoneModelParams& params,
                        const CombinedPsfCdf& cdf, int quad_order) {
  return MarginalDensity(params, cdf, t, quad_order)(z);
}

void AxisSpec::validate(const char* name) const {
  if (count < 2) throw Error(std::string("axis ") + name + ": count must be >= 2");
  if (!(max > min)) throw Error(std::string("axis ") + name + ": max must exceed min");
  if (!std::isfinite(min) || !std::isfinite(max))
    throw Error(std::string("axis ") + name + ": bounds must be finite");
}

void TableAxes::validate() const {
  t.validate("t");
  theta.validate("theta");
  z.validate("z");
  if (theta.min < 0.0 || theta.max > 90.0)
    throw Error("axis theta: must lie within [0, 90] degrees");
}

MeasurementModelTable MeasurementModelTable::build(const ScannerConfig& scanner,
                                                   const RegionParams& params,
                                                   const TableAxes& axes, int quad_order,
                                                   int threads) {
  scanner.validate();
  axes.validate();
  if (quad_order < 2) throw Error("table: quadrature order must be >= 2");
  if (params.empty()) throw Error("table: at least one region required");
  for (const auto& [region, p] : params) {
    if (!region_is_modeled(region))
      throw Error(std::string("table: region ") + to_string(region) + " carries no bone model");
    p.validate();
  }

  MeasurementModelTable table;
  table.scanner_ = scanner;
  table.axes_ = axes;
  table.quad_order_ = quad_order;

  const int nt = axes.t.count, ntheta = axes.theta.count, nz = axes.z.count;

  std::vector<CombinedPsfCdf> cdfs(ntheta);
  parallel_for(ntheta, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k)
      cdfs[k] = CombinedPsfCdf::build(scanner, axes.theta.value(static_cast<int>(k)));
  });

  std::vector<RegionLabel> regions;
  std::vector<float*> region_ptrs;
  std::vector<const BoneModelParams*> region_params;
  for (const auto& [region, p] : params) {
    regions.push_back(region);
    table.data_[region].resize(static_cast<std::size_t>(nt) * ntheta * nz);
  }
  for (const RegionLabel region : regions) {
    region_ptrs.push_back(table.data_[region].data());
    region_params.push_back(&params.at(region));
  }

  // One work item per (region, theta, t) line; each fills a z-strided line of
  // the grid, so items are independent and the result does not depend on the
  // thread count.
  const std::size_t lines = regions.size() * static_cast<std::size_t>(ntheta) * nt;
  parallel_for(lines, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t line = begin; line < end; ++line) {
      const int it = static_cast<int>(line % nt);
      const int itheta = static_cast<int>((line / nt) % ntheta);
      const std::size_t region_idx = line / (static_cast<std::size_t>(nt) * ntheta);
      float* data = region_ptrs[region_idx];
      const MarginalDensity density(*region_params[region_idx], cdfs[itheta],
                                    axes.t.value(it), quad_order);
      const std::size_t base = static_cast<std::size_t>(it) +
                               static_cast<std::size_t>(nt) * itheta;
      const std::size_t stride = static_cast<std::size_t>(nt) * ntheta;
      for (int iz = 0; iz < nz; ++iz)
        data[base + stride * iz] = static_cast<float>(density(axes.z.value(iz)));
    }
  });

  return table;
}

std::vector<RegionLabel> MeasurementModelTable::regions() const {
  std::vector<RegionLabel> out;
  for (const auto& [region, data] : data_) out.push_back(region);
  return out;
}

const std::vector<float>& MeasurementModelTable::region_data(RegionLabel region) const {
  const auto it = data_.find(region);
  if (it == data_.end())
    throw Error(std::string("table: no data for region ") + to_string(region));
  return it->second;
}

namespace {

struct AxisCoord {
  int i0;
  double frac;
};

AxisCoord clamp_to_axis(const AxisSpec& axis, double x) {
  const double u = (x - axis.min) / axis.step();
  if (u <= 0.0) return {0, 0.0};
  if (u >= axis.count - 1) return {axis.count - 2, 1.0};
  const int i = std::min(static_cast<int>(u), axis.count - 2);
  return {i, u - i};
}

double trilinear_lookup(const TableAxes& axes, const float* data, double t, double theta,
                        double z) {
  const AxisCoord ct = clamp_to_axis(axes.t, t);
  const AxisCoord ctheta = clamp_to_axis(axes.theta, theta);
  const AxisCoord cz = clamp_to_axis(axes.z, z);
  const std::size_t nt = axes.t.count;
  const std::size_t slab = nt * axes.theta.count;

  double value = 0.0;
  for (int dz = 0; dz <= 1; ++dz) {
    const double wz = dz ? cz.frac : 1.0 - cz.frac;
    if (wz == 0.0) continue;
    for (int dth = 0; dth <= 1; ++dth) {
      const double wth = dth ? ctheta.frac : 1.0 - ctheta.frac;
      if (wth == 0.0) continue;
      const std::size_t base = nt * (ctheta.i0 + dth) + slab * (cz.i0 + dz);
      const double row = (1.0 - ct.frac) * data[base + ct.i0] + ct.frac * data[base + ct.i0 + 1];
      value += wz * wth * row;
    }
  }
  return value;
}

}  // namespace

double MeasurementModelTable::lookup(RegionLabel region, double t, double theta_deg,
                                     double z) const {
  return trilinear_lookup(axes_, region_data(region).data(), t, theta_deg, z);
}

double MeasurementModelTable::View::operator()(double t, double theta_deg, double z) const {
  return trilinear_lookup(*axes_, data_, t, theta_deg, z);
}

namespace {

void write_axis(std::ostream& out, const char* name, const AxisSpec& axis) {
  out << "axis." << name << " = " << format_double(axis.min) << " " << format_double(axis.max)
      << " " << axis.count << "\n";
}

AxisSpec parse_axis(const std::string& text, const std::string& context) {
  std::istringstream ss(text);
  std::string lo, hi, count;
  if (!(ss >> lo >> hi >> count) || !(ss >> std::ws).eof())
    throw Error(context + ": expected 'min max count'");
  AxisSpec axis;
  axis.min = parse_double(lo, context);
  axis.max = parse_double(hi, context);
  axis.count = static_cast<int>(parse_int(count, context));
  return axis;
}

void byteswap_floats(std::vector<float>& values) {
  for (float& v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = __builtin_bswap32(bits);
    std::memcpy(&v, &bits, 4);
  }
}

}  // namespace

void MeasurementModelTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "format_version = 1\n";
  out << "scanner.slice_width = " << format_double(scanner_.slice_width) << "\n";
  out << "scanner.in_plane_sigma = " << format_double(scanner_.in_plane_sigma) << "\n";
  out << "regions =";
  for (const auto& [region, data] : data_) out << " " << to_string(region);
  out << "\n";
  write_axis(out, "t", axes_.t);
  write_axis(out, "theta", axes_.theta);
  write_axis(out, "z", axes_.z);
  out << "quadrature_order = " << quad_order_ << "\n";
  out << "end_header\n";
  for (const auto& [region, data] : data_) {
    if constexpr (std::endian::native == std::endian::big) {
      std::vector<float> swapped = data;
      byteswap_floats(swapped);
      out.write(reinterpret_cast<const char*>(swapped.data()),
                static_cast<std::streamsize>(swapped.size() * 4));
    } else {
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * 4));
    }
  }
  if (!out.flush()) throw Error("failed writing '" + path.string() + "'");
}

MeasurementModelTable MeasurementModelTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");

  std::ostringstream header_text;
  std::string line;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    header_text << line << "\n";
  }
  if (!saw_end) throw Error(path.string() + ": missing end_header");
  std::istringstream header_stream(header_text.str());
  const KeyValueFile header = parse_key_value(header_stream, path.string());

  for (const auto& [key, value] : header.entries) {
    if (key != "format_version" && key != "scanner.slice_width" &&
        key != "scanner.in_plane_sigma" && key != "regions" && key != "axis.t" &&
        key != "axis.theta" && key != "axis.z" && key != "quadrature_order")
      throw Error(path.string() + ": unknown key '" + key + "'");
  }
  if (parse_int(header.get("format_version"), path.string()) != 1)
    throw Error(path.string() + ": unsupported format_version");

  MeasurementModelTable table;
  table.scanner_.slice_width =
      parse_double(header.get("scanner.slice_width"), path.string() + ": scanner.slice_width");
  table.scanner_.in_plane_sigma = parse_double(header.get("scanner.in_plane_sigma"),
                                               path.string() + ": scanner.in_plane_sigma");
  table.scanner_.validate();
  table.axes_.t = parse_axis(header.get("axis.t"), path.string() + ": axis.t");
  table.axes_.theta = parse_axis(header.get("axis.theta"), path.string() + ": axis.theta");
  table.axes_.z = parse_axis(header.get("axis.z"), path.string() + ": axis.z");
  table.axes_.validate();
  table.quad_order_ =
      static_cast<int>(parse_int(header.get("quadrature_order"), path.string()));

  std::vector<RegionLabel> regions;
  {
    std::istringstream ss(header.get("regions"));
    std::string token;
    while (ss >> token) regions.push_back(region_from_string(token));
    if (regions.empty()) throw Error(path.string() + ": regions list is empty");
  }

  const std::size_t cells = static_cast<std::size_t>(table.axes_.t.count) *
                            table.axes_.theta.count * table.axes_.z.count;
  for (const RegionLabel region : regions) {
    std::vector<float> data(cells);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(cells * 4));
    if (!in)
      throw Error(path.string() + ": truncated payload for region " + to_string(region));
    if constexpr (std::endian::native == std::endian::big) byteswap_floats(data);
    for (const float v : data)
      if (!(v >= 0.0f) || !std::isfinite(v))
        throw Error(path.string() + ": negative or non-finite density for region " +
                    to_string(region));
    table.data_[region] = std::move(data);
  }
  in.peek();
  if (!in.eof()) throw Error(path.string() + ": trailing bytes after payload");
  return table;
}

}  // namespace cortexfit
