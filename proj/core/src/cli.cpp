#include "cortexfit/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cortexfit/eval.hpp"
#include "cortexfit/key_value.hpp"
#include "cortexfit/mesh.hpp"
#include "cortexfit/phantom.hpp"
#include "cortexfit/pipeline.hpp"
#include "cortexfit/volume.hpp"

namespace cortexfit {

namespace {

struct MakePhantomOptions {
  std::string preset = "medium";
  PhantomSpec overrides;  // preset applied first, flags override
  bool has_diameter = false, has_height = false, has_wall = false, has_endplate = false;
  double fine_spacing = 0.1;
  double margin = 5.0;
  std::vector<double> out_spacing = {0.4, 0.4, 1.0};
  double sigma = 0.4;
  double noise_sd = 10.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string truth;
  int threads = 0;
};

int cmd_make_phantom(const MakePhantomOptions& opt) {
  PhantomSpec spec = PhantomSpec::preset(opt.preset);
  if (opt.has_diameter) spec.diameter = opt.overrides.diameter;
  if (opt.has_height) spec.height = opt.overrides.height;
  if (opt.has_wall) spec.wall = opt.overrides.wall;
  if (opt.has_endplate) spec.endplate = opt.overrides.endplate;
  spec.cortical = opt.overrides.cortical;
  spec.trabecular = opt.overrides.trabecular;
  spec.background = opt.overrides.background;
  spec.supersampling = opt.overrides.supersampling;
  spec.noise_sd = opt.noise_sd;
  if (opt.out_spacing.size() != 3) throw Error("--out-spacing needs three values");

  ScannerConfig scanner{opt.out_spacing[2], opt.sigma};
  const CalibratedVolume fine = rasterize(spec, opt.fine_spacing, opt.margin, opt.threads);
  const CalibratedVolume scan =
      simulate_scan(fine, scanner, {opt.out_spacing[0], opt.out_spacing[1], opt.out_spacing[2]},
                    spec.noise_sd, opt.seed, opt.threads);
  write_volume(scan, opt.out);
  const std::string truth_path = opt.truth.empty() ? opt.out + ".truth" : opt.truth;
  write_ground_truth(spec, truth_path);
  return 0;
}

struct MakeTemplateOptions {
  double radius = 0.0;
  double height = 0.0;
  int segments = 64;
  std::string out;
};

int cmd_make_template(const MakeTemplateOptions& opt) {
  const LabeledSurfaceMesh mesh = make_template(opt.radius, opt.height, opt.segments);
  write_mesh(mesh, opt.out);
  return 0;
}

struct BuildModelOptions {
  std::string config;
  std::string out;
  int threads = 0;
};

int cmd_build_model(const BuildModelOptions& opt) {
  const PipelineConfig config = read_pipeline_config(opt.config);
  const MeasurementModelTable table = MeasurementModelTable::build(
      config.scanner, config.priors, config.axes, config.quadrature_order, opt.threads);
  table.write(opt.out);
  return 0;
}

struct FitOptions {
  std::string volume;
  std::string mesh;
  std::string config;
  std::string out;
  std::string report;
  int threads = 0;
};

int cmd_fit(const FitOptions& opt) {
  const PipelineConfig config = read_pipeline_config(opt.config);
  const CalibratedVolume volume = read_volume(opt.volume);
  const LabeledSurfaceMesh tmpl = read_mesh(opt.mesh);
  const MeasurementModelTable table = MeasurementModelTable::read(config.table_path);

  const PipelineResult result = run_pipeline(volume, tmpl, table, config, opt.threads);
  write_mesh(result.mesh, opt.out);
  if (!opt.report.empty()) {
    std::ofstream report(opt.report);
    if (!report) throw Error("cannot write '" + opt.report + "'");
    write_report(result.report, report);
    if (!report.flush()) throw Error("failed writing '" + opt.report + "'");
  }
  std::cerr << "fit: " << result.report.iterations.size() << " iterations, "
            << result.report.wall_time_s << " s\n";
  return 0;
}

struct EvaluateOptions {
  std::string mesh;
  std::string truth;
  std::string reference;
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  std::string out;
};

void print_report_row(std::ostream& os, const std::string& name, const AccuracyReport& report) {
  os << name << "," << report.n << "," << format_double(report.mean) << ","
     << format_double(report.sd) << "," << format_double(report.diff) << ","
     << format_double(report.q25_abs) << "," << format_double(report.q50_abs) << ","
     << format_double(report.q75_abs) << "\n";
}

void evaluate_against_truth(const PhantomTruth& truth, const SurfaceSamples& samples,
                            std::ostream& os) {
  std::vector<Vec3> cortex_points;
  std::vector<Vec3> endplate_points;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.labels[i] == RegionLabel::VerticalCortex)
      cortex_points.push_back(samples.points[i]);
    else if (samples.labels[i] == RegionLabel::Endplates)
      endplate_points.push_back(samples.points[i]);
  }
  if (cortex_points.size() < 6) throw Error("evaluate: too few vertical-cortex samples");
  if (endplate_points.size() < 6) throw Error("evaluate: too few endplate samples");

  const CylinderFit cylinder = fit_cylinder(cortex_points);
  os << "surface,n,mean,sd,diff,q25_abs,q50_abs,q75_abs\n";
  print_report_row(os, "radius",
                   accuracy_report(cylinder.point_radii, truth.center_radius));

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : endplate_points) centroid += p;
  centroid /= static_cast<double>(endplate_points.size());
  std::vector<Vec3> upper, lower;
  for (const Vec3& p : endplate_points)
    ((p - centroid).dot(cylinder.axis_direction) > 0.0 ? upper : lower).push_back(p);
  const ParallelPlanesFit planes = fit_parallel_planes(upper, lower);
  std::vector<double> heights = planes.upper_to_lower;
  heights.insert(heights.end(), planes.lower_to_upper.begin(), planes.lower_to_upper.end());
  print_report_row(os, "height", accuracy_report(heights, 2.0 * truth.plane_offset));
}

void evaluate_against_reference(const LabeledSurfaceMesh& reference,
                                const SurfaceSamples& samples, std::ostream& os) {
  std::vector<double> all;
  std::map<RegionLabel, std::vector<double>> per_label;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = point_to_mesh_distance(samples.points[i], reference);
    all.push_back(d);
    per_label[samples.labels[i]].push_back(d);
  }
  os << "surface,n,mean,sd,diff,q25_abs,q50_abs,q75_abs\n";
  print_report_row(os, "distance_all", accuracy_report(all, 0.0));
  for (const auto& [label, values] : per_label)
    print_report_row(os, std::string("distance_") + to_string(label),
                     accuracy_report(values, 0.0));
}

int cmd_evaluate(const EvaluateOptions& opt) {
  if (opt.truth.empty() == opt.reference.empty())
    throw Error("evaluate: exactly one of --truth or --reference is required");
  const LabeledSurfaceMesh mesh = read_mesh(opt.mesh);
  const SurfaceSamples samples = sample_surface(mesh, opt.samples, opt.seed);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!opt.out.empty()) {
    file.open(opt.out);
    if (!file) throw Error("cannot write '" + opt.out + "'");
    os = &file;
  }
  if (!opt.truth.empty()) {
    evaluate_against_truth(read_ground_truth(opt.truth), samples, *os);
  } else {
    evaluate_against_reference(read_mesh(opt.reference), samples, *os);
  }
  if (os == &file && !file.flush()) throw Error("failed writing '" + opt.out + "'");
  return 0;
}

int cmd_info(const std::string& volume_path) {
  const CalibratedVolume volume = read_volume(volume_path);
  std::cout << "dims = " << volume.dims()[0] << " " << volume.dims()[1] << " "
            << volume.dims()[2] << "\n";
  std::cout << "spacing = " << format_double(volume.spacing()[0]) << " "
            << format_double(volume.spacing()[1]) << " " << format_double(volume.spacing()[2])
            << "\n";
  std::cout << "origin = " << format_double(volume.origin()[0]) << " "
            << format_double(volume.origin()[1]) << " " << format_double(volume.origin()[2])
            << "\n";
  std::cout << "voxels = " << volume.voxel_count() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"cortexfit: identifies the center surface of a bone's cortical shell in "
               "calibrated CT volumes"};
  app.require_subcommand(1);

  MakePhantomOptions phantom_opt;
  CLI::App* make_phantom = app.add_subcommand(
      "make-phantom", "Generate a synthetic phantom scan with known ground truth");
  make_phantom->add_option("--preset", phantom_opt.preset, "Phantom preset: low, medium or high")
      ->required();
  make_phantom->add_option("--diameter", phantom_opt.overrides.diameter, "Outer diameter (mm)");
  make_phantom->add_option("--height", phantom_opt.overrides.height, "Height (mm)");
  make_phantom->add_option("--wall", phantom_opt.overrides.wall, "Wall thickness (mm)");
  make_phantom->add_option("--endplate", phantom_opt.overrides.endplate,
                           "Endplate thickness (mm)");
  make_phantom->add_option("--cortical", phantom_opt.overrides.cortical,
                           "Cortical density (mg/cc)");
  make_phantom->add_option("--trabecular", phantom_opt.overrides.trabecular,
                           "Trabecular density (mg/cc)");
  make_phantom->add_option("--background", phantom_opt.overrides.background,
                           "Background density (mg/cc)");
  make_phantom->add_option("--supersampling", phantom_opt.overrides.supersampling,
                           "Sub-samples per voxel axis (>= 2)");
  make_phantom->add_option("--fine-spacing", phantom_opt.fine_spacing,
                           "Rasterization spacing (mm)");
  make_phantom->add_option("--margin", phantom_opt.margin, "Rasterization margin (mm)");
  make_phantom->add_option("--out-spacing", phantom_opt.out_spacing,
                           "Scan spacing: x y z (mm)")
      ->expected(3);
  make_phantom->add_option("--sigma", phantom_opt.sigma, "In-plane PSF sigma (mm)");
  make_phantom->add_option("--noise-sd", phantom_opt.noise_sd, "Scan noise SD (mg/cc)");
  make_phantom->add_option("--seed", phantom_opt.seed, "Noise seed");
  make_phantom->add_option("--out", phantom_opt.out, "Output volume header path")->required();
  make_phantom->add_option("--truth", phantom_opt.truth,
                           "Ground-truth path (default: <out>.truth)");
  make_phantom->add_option("--threads", phantom_opt.threads, "Worker threads (0 = hardware)");

  MakeTemplateOptions template_opt;
  CLI::App* make_template_cmd =
      app.add_subcommand("make-template", "Generate a labeled capped-cylinder template mesh");
  make_template_cmd->add_option("--radius", template_opt.radius, "Cylinder radius (mm)")
      ->required();
  make_template_cmd->add_option("--height", template_opt.height, "Cylinder height (mm)")
      ->required();
  make_template_cmd->add_option("--segments", template_opt.segments, "Angular segments (>= 8)");
  make_template_cmd->add_option("--out", template_opt.out, "Output mesh path")->required();

  BuildModelOptions build_opt;
  CLI::App* build_model =
      app.add_subcommand("build-model", "Precompute the measurement-model lookup table");
  build_model->add_option("--config", build_opt.config, "Pipeline config file")->required();
  build_model->add_option("--out", build_opt.out, "Output table path")->required();
  build_model->add_option("--threads", build_opt.threads, "Worker threads (0 = hardware)");

  FitOptions fit_opt;
  CLI::App* fit = app.add_subcommand("fit", "Fit a template to a calibrated volume");
  fit->add_option("--volume", fit_opt.volume, "Calibrated volume header")->required();
  fit->add_option("--mesh", fit_opt.mesh, "Template mesh (labels sidecar expected)")->required();
  fit->add_option("--config", fit_opt.config, "Pipeline config file")->required();
  fit->add_option("--out", fit_opt.out, "Output mesh path")->required();
  fit->add_option("--report", fit_opt.report, "Per-iteration report path (CSV)");
  fit->add_option("--threads", fit_opt.threads, "Worker threads (0 = hardware)");

  EvaluateOptions eval_opt;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Measure a fitted mesh against a ground-truth file or a reference mesh");
  evaluate->add_option("--mesh", eval_opt.mesh, "Fitted mesh path")->required();
  evaluate->add_option("--truth", eval_opt.truth, "Phantom ground-truth file");
  evaluate->add_option("--reference", eval_opt.reference, "Reference mesh path");
  evaluate->add_option("--samples", eval_opt.samples, "Surface sample count");
  evaluate->add_option("--seed", eval_opt.seed, "Sampling seed");
  evaluate->add_option("--out", eval_opt.out, "Report path (default: stdout)");

  std::string info_path;
  CLI::App* info = app.add_subcommand("info", "Print volume header information");
  info->add_option("volume", info_path, "Volume header path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(make_phantom)) {
      phantom_opt.has_diameter = make_phantom->count("--diameter") > 0;
      phantom_opt.has_height = make_phantom->count("--height") > 0;
      phantom_opt.has_wall = make_phantom->count("--wall") > 0;
      phantom_opt.has_endplate = make_phantom->count("--endplate") > 0;
      return cmd_make_phantom(phantom_opt);
    }
    if (app.got_subcommand(make_template_cmd)) return cmd_make_template(template_opt);
    if (app.got_subcommand(build_model)) return cmd_build_model(build_opt);
    if (app.got_subcommand(fit)) return cmd_fit(fit_opt);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(eval_opt);
    if (app.got_subcommand(info)) return cmd_info(info_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cortexfit
