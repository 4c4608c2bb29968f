#include "cortexfit/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cortexfit/key_value.hpp"
#include "cortexfit/parallel.hpp"

namespace cortexfit {

void PipelineConfig::validate() const {
  scanner.validate();
  if (table_path.empty()) throw Error("config: table path must be set");
  if (priors.empty()) throw Error("config: at least one region prior required");
  for (const auto& [region, params] : priors) {
    if (!region_is_modeled(region))
      throw Error(std::string("config: region ") + to_string(region) + " carries no bone model");
    params.validate();
  }
  profile.validate();
  search.validate();
  if (!(sigma_s > 0.0)) throw Error("config: sigma_s must be > 0");
  if (!(sigma_e > 0.0)) throw Error("config: sigma_e must be > 0");
  if (max_iterations < 0) throw Error("config: outer.max_iterations must be >= 0");
  if (!(rms_tolerance > 0.0)) throw Error("config: outer.rms_tolerance must be > 0");
  if (!(pcg_tolerance > 0.0)) throw Error("config: pcg.tolerance must be > 0");
  if (pcg_max_iterations < 0) throw Error("config: pcg.max_iterations must be >= 0");
  axes.validate();
  if (quadrature_order < 2) throw Error("config: quadrature.order must be >= 2");
}

namespace {

struct PriorKey {
  RegionLabel region;
  std::string group;
  std::string field;
};

PriorKey split_prior_key(const std::string& key, const std::string& source) {
  // prior.<region>.<group>.<field>
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(key.substr(start));
      break;
    }
    parts.push_back(key.substr(start, dot - start));
    start = dot + 1;
  }
  if (parts.size() != 4)
    throw Error(source + ": unknown key '" + key + "'");
  PriorKey out;
  out.region = region_from_string(parts[1]);
  if (!region_is_modeled(out.region))
    throw Error(source + ": key '" + key + "': region CutPedicles carries no bone model");
  out.group = parts[2];
  out.field = parts[3];
  return out;
}

void apply_prior_key(BoneModelParams& params, const PriorKey& pk, double value,
                     const std::string& context) {
  DensityPrior* density = nullptr;
  if (pk.group == "soft_tissue") density = &params.soft_tissue;
  else if (pk.group == "cortical") density = &params.cortical;
  else if (pk.group == "trabecular") density = &params.trabecular;

  if (density) {
    if (pk.field == "mean") density->mean = value;
    else if (pk.field == "sd") density->sd = value;
    else throw Error(context + ": unknown prior field '" + pk.field + "'");
    return;
  }
  if (pk.group == "half_width") {
    if (pk.field == "log_mean") params.half_width.log_mean = value;
    else if (pk.field == "log_sd") params.half_width.log_sd = value;
    else throw Error(context + ": unknown prior field '" + pk.field + "'");
    return;
  }
  throw Error(context + ": unknown prior group '" + pk.group + "'");
}

AxisSpec parse_axis_value(const std::string& text, const std::string& context) {
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

}  // namespace

PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  const KeyValueFile file = read_key_value_file(path);
  PipelineConfig config;
  bool saw_slice_width = false, saw_sigma = false, saw_table = false;

  for (const auto& [key, value] : file.entries) {
    const std::string context = file.source + ": " + key;
    if (key == "scanner.slice_width") {
      config.scanner.slice_width = parse_double(value, context);
      saw_slice_width = true;
    } else if (key == "scanner.in_plane_sigma") {
      config.scanner.in_plane_sigma = parse_double(value, context);
      saw_sigma = true;
    } else if (key == "table") {
      std::filesystem::path p(value);
      config.table_path = p.is_absolute() ? p : path.parent_path() / p;
      saw_table = true;
    } else if (key == "profile.half_extent") {
      config.profile.half_extent = parse_double(value, context);
    } else if (key == "profile.samples_per_side") {
      config.profile.samples_per_side = static_cast<int>(parse_int(value, context));
    } else if (key == "search.max_shift") {
      config.search.max_shift = parse_double(value, context);
    } else if (key == "search.step") {
      config.search.step = parse_double(value, context);
    } else if (key == "sigma_s") {
      config.sigma_s = parse_double(value, context);
    } else if (key == "sigma_e") {
      config.sigma_e = parse_double(value, context);
    } else if (key == "outer.max_iterations") {
      config.max_iterations = static_cast<int>(parse_int(value, context));
    } else if (key == "outer.rms_tolerance") {
      config.rms_tolerance = parse_double(value, context);
    } else if (key == "pcg.tolerance") {
      config.pcg_tolerance = parse_double(value, context);
    } else if (key == "pcg.max_iterations") {
      config.pcg_max_iterations = static_cast<int>(parse_int(value, context));
    } else if (key == "axes.t") {
      config.axes.t = parse_axis_value(value, context);
    } else if (key == "axes.theta") {
      config.axes.theta = parse_axis_value(value, context);
    } else if (key == "axes.z") {
      config.axes.z = parse_axis_value(value, context);
    } else if (key == "quadrature.order") {
      config.quadrature_order = static_cast<int>(parse_int(value, context));
    } else if (key.rfind("prior.", 0) == 0) {
      const PriorKey pk = split_prior_key(key, file.source);
      apply_prior_key(config.priors[pk.region], pk, parse_double(value, context), context);
    } else {
      throw Error(file.source + ": unknown key '" + key + "'");
    }
  }

  if (!saw_slice_width) throw Error(file.source + ": missing key 'scanner.slice_width'");
  if (!saw_sigma) throw Error(file.source + ": missing key 'scanner.in_plane_sigma'");
  if (!saw_table) throw Error(file.source + ": missing key 'table'");
  config.validate();
  return config;
}

void write_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "scanner.slice_width = " << format_double(config.scanner.slice_width) << "\n";
  out << "scanner.in_plane_sigma = " << format_double(config.scanner.in_plane_sigma) << "\n";
  out << "table = " << config.table_path.string() << "\n";
  out << "profile.half_extent = " << format_double(config.profile.half_extent) << "\n";
  out << "profile.samples_per_side = " << config.profile.samples_per_side << "\n";
  out << "search.max_shift = " << format_double(config.search.max_shift) << "\n";
  out << "search.step = " << format_double(config.search.step) << "\n";
  out << "sigma_s = " << format_double(config.sigma_s) << "\n";
  out << "sigma_e = " << format_double(config.sigma_e) << "\n";
  out << "outer.max_iterations = " << config.max_iterations << "\n";
  out << "outer.rms_tolerance = " << format_double(config.rms_tolerance) << "\n";
  out << "pcg.tolerance = " << format_double(config.pcg_tolerance) << "\n";
  out << "pcg.max_iterations = " << config.pcg_max_iterations << "\n";
  out << "axes.t = " << format_double(config.axes.t.min) << " " << format_double(config.axes.t.max)
      << " " << config.axes.t.count << "\n";
  out << "axes.theta = " << format_double(config.axes.theta.min) << " "
      << format_double(config.axes.theta.max) << " " << config.axes.theta.count << "\n";
  out << "axes.z = " << format_double(config.axes.z.min) << " " << format_double(config.axes.z.max)
      << " " << config.axes.z.count << "\n";
  out << "quadrature.order = " << config.quadrature_order << "\n";
  for (const auto& [region, p] : config.priors) {
    const std::string prefix = std::string("prior.") + to_string(region) + ".";
    out << prefix << "soft_tissue.mean = " << format_double(p.soft_tissue.mean) << "\n";
    out << prefix << "soft_tissue.sd = " << format_double(p.soft_tissue.sd) << "\n";
    out << prefix << "cortical.mean = " << format_double(p.cortical.mean) << "\n";
    out << prefix << "cortical.sd = " << format_double(p.cortical.sd) << "\n";
    out << prefix << "trabecular.mean = " << format_double(p.trabecular.mean) << "\n";
    out << prefix << "trabecular.sd = " << format_double(p.trabecular.sd) << "\n";
    out << prefix << "half_width.log_mean = " << format_double(p.half_width.log_mean) << "\n";
    out << prefix << "half_width.log_sd = " << format_double(p.half_width.log_sd) << "\n";
  }
  if (!out.flush()) throw Error("failed writing '" + path.string() + "'");
}

void write_report(const FitReport& report, std::ostream& out) {
  out << "iteration,weighted_rms_mm,mean_gamma,e_shape\n";
  for (std::size_t i = 0; i < report.iterations.size(); ++i) {
    const auto& row = report.iterations[i];
    out << i + 1 << "," << format_double(row.weighted_rms) << ","
        << format_double(row.mean_gamma) << "," << format_double(row.e_shape) << "\n";
  }
}

PipelineResult run_pipeline(const CalibratedVolume& volume, const LabeledSurfaceMesh& tmpl,
                            const MeasurementModelTable& table, const PipelineConfig& config,
                            int threads) {
  const auto start_time = std::chrono::steady_clock::now();
  config.validate();
  tmpl.validate();

  if (!(table.scanner() == config.scanner)) {
    std::ostringstream msg;
    msg << "table/scanner mismatch: config has slice_width "
        << format_double(config.scanner.slice_width) << ", in_plane_sigma "
        << format_double(config.scanner.in_plane_sigma) << " but the table was built with "
        << format_double(table.scanner().slice_width) << ", "
        << format_double(table.scanner().in_plane_sigma);
    throw Error(msg.str());
  }
  if (config.profile.half_extent > table.axes().t.max)
    throw Error("config: profile.half_extent exceeds the table's t-axis range");
  for (const RegionLabel label : tmpl.labels)
    if (region_is_modeled(label) && !table.has_region(label))
      throw Error(std::string("table has no region ") + to_string(label) +
                  " required by the template");

  PipelineResult result;
  result.mesh = tmpl;
  RotationSet rotations = identity_rotations(tmpl.vertex_count());

  SurfaceFitOptions fit_options;
  fit_options.sigma_e = config.sigma_e;
  fit_options.pcg_tol = config.pcg_tolerance;
  fit_options.pcg_max_iter = config.pcg_max_iterations > 0 ? config.pcg_max_iterations : -1;

  const int n = tmpl.vertex_count();
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const std::vector<Profile> profiles =
        sample_profiles(result.mesh, volume, config.profile, threads);

    std::vector<Displacement> displacements(n);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (!profiles[i].valid) continue;
        displacements[i] = optimal_displacement(profiles[i], table, result.mesh.labels[i],
                                                config.profile, config.sigma_s, config.search);
      }
    });

    FitTargets targets;
    targets.points.resize(n);
    targets.normals.resize(n);
    targets.weights.resize(n);
    double weighted_sq = 0.0, weight_sum = 0.0, gamma_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      targets.points[i] =
          result.mesh.vertices[i] + displacements[i].shift * profiles[i].direction;
      targets.normals[i] = profiles[i].direction;
      targets.weights[i] = displacements[i].confidence;
      weighted_sq += displacements[i].confidence * displacements[i].shift * displacements[i].shift;
      weight_sum += displacements[i].confidence;
      gamma_sum += displacements[i].confidence;
    }
    const double weighted_rms = weight_sum > 0.0 ? std::sqrt(weighted_sq / weight_sum) : 0.0;

    const SurfaceFitResult fit = fit_surface(result.mesh, targets, fit_options, &rotations);
    rotations = fit.rotations;
    result.mesh.vertices = fit.positions;

    FitReport::Iteration row;
    row.weighted_rms = weighted_rms;
    row.mean_gamma = gamma_sum / n;
    row.e_shape = fit.e_shape.empty() ? 0.0 : fit.e_shape.back();
    result.report.iterations.push_back(row);

    if (weighted_rms < config.rms_tolerance) break;
  }

  result.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

}  // namespace cortexfit
